"""Chebyshev collocation with IELDTM time stepping for the viscous Burgers equation."""
