"""Chebyshev-Gauss-Lobatto collocation on an arbitrary interval.

Nodes are stored in ascending order, ``x_n = (a + b)/2 - (b - a)/2 cos(pi n / N)``,
so ``x_0 = a`` and ``x_N = b``. Derivatives are taken with the explicit
collocation differentiation matrix and off-node values come from the
truncated Chebyshev expansion whose coefficients follow from the discrete
orthogonality of ``T_i`` on the Lobatto points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C

__all__ = [
    "CollocationGrid",
    "DiffMatrices",
    "collocation_points",
    "diff_matrix",
    "chebyshev_coefficients",
    "interp_eval",
    "interp_matrix",
]


@dataclass(frozen=True, eq=False)
class CollocationGrid:
    """Chebyshev-Gauss-Lobatto nodes for one spatial axis.

    Attributes
    ----------
    a, b : float
        Interval endpoints, ``a < b``.
    N : int
        Polynomial degree; there are ``N + 1`` nodes.
    nodes : ndarray
        Ascending collocation points, shape ``(N + 1,)``.
    ortho_weights : ndarray
        Weights of the discrete orthogonality relation: 1/2 at the two
        endpoints, 1 in the interior.
    """

    a: float
    b: float
    N: int
    nodes: np.ndarray = field(repr=False)
    ortho_weights: np.ndarray = field(repr=False)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    def to_reference(self, x):
        """Map physical coordinates to ``[-1, 1]``."""
        return (2.0 * np.asarray(x, dtype=float) - (self.a + self.b)) / (self.b - self.a)


@dataclass(frozen=True, eq=False)
class DiffMatrices:
    """First (``A``) and second (``B = A @ A``) derivative collocation operators."""

    A: np.ndarray
    B: np.ndarray


def collocation_points(a: float, b: float, N: int) -> CollocationGrid:
    """Build the Lobatto grid of degree ``N`` on ``[a, b]``.

    Raises
    ------
    ValueError
        If ``b <= a`` or ``N < 2``.
    """
    a = float(a)
    b = float(b)
    if not b > a:
        raise ValueError(f"degenerate domain: need b > a, got [{a}, {b}]")
    if int(N) != N or N < 2:
        raise ValueError(f"polynomial degree must be an integer >= 2, got {N}")
    N = int(N)
    # (1 - cos(pi n/N))/2 = sin^2(pi n/2N); measuring each half from its own
    # endpoint avoids cancellation and keeps the grid mirror-symmetric
    n = np.arange(N + 1)
    left = n <= N // 2
    nodes = np.where(left, a + (b - a) * np.sin(np.pi * n / (2 * N)) ** 2,
                     b - (b - a) * np.sin(np.pi * (N - n) / (2 * N)) ** 2)
    nodes[0] = a
    nodes[-1] = b
    if N % 2 == 0:
        nodes[N // 2] = 0.5 * (a + b)
    weights = np.ones(N + 1)
    weights[0] = weights[-1] = 0.5
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return CollocationGrid(a=a, b=b, N=N, nodes=nodes, ortho_weights=weights)


def _reference_diff_matrix(N: int) -> np.ndarray:
    """First-derivative matrix on ascending Lobatto points of ``[-1, 1]``."""
    theta = np.pi * np.arange(N + 1) / N
    # x_i - x_j = cos(theta_j) - cos(theta_i) without cancellation
    ti = theta[:, None]
    tj = theta[None, :]
    dx = 2.0 * np.sin(0.5 * (ti + tj)) * np.sin(0.5 * (ti - tj))
    # x_i - x_j = -(x_{N-i} - x_{N-j}); copy the accurate half onto the other
    half = (N + 1) // 2
    dx[N + 1 - half:, :] = -dx[:half, :][::-1, ::-1]
    np.fill_diagonal(dx, 1.0)

    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    D = (c[:, None] / c[None, :]) / dx
    np.fill_diagonal(D, 0.0)
    # negative-sum trick: rows of D annihilate constants
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def diff_matrix(grid: CollocationGrid) -> DiffMatrices:
    """Collocation differentiation matrices for ``grid``.

    ``A @ u`` returns the derivative of the degree-``N`` interpolant of the
    nodal values ``u`` at the nodes; ``B`` is ``A @ A``.
    """
    A = _reference_diff_matrix(grid.N) * (2.0 / (grid.b - grid.a))
    B = A @ A
    A.setflags(write=False)
    B.setflags(write=False)
    return DiffMatrices(A=A, B=B)


def _node_basis(N: int) -> np.ndarray:
    """``T_i(xi_n)`` for ascending Lobatto points, shape ``(N + 1, N + 1)`` as [i, n]."""
    i = np.arange(N + 1)[:, None]
    n = np.arange(N + 1)[None, :]
    # T_i(-cos(pi n/N)) = (-1)^i cos(pi i n/N); reduce i*n mod 2N to keep the argument small
    return (-1.0) ** i * np.cos(np.pi * ((i * n) % (2 * N)) / N)


def _gamma(N: int) -> np.ndarray:
    g = np.full(N + 1, 0.5 * N)
    g[0] = g[-1] = float(N)
    return g


def chebyshev_coefficients(grid: CollocationGrid, values) -> np.ndarray:
    """Expansion coefficients ``c`` with ``u(x) = sum_i c_i T_i(xi(x))``.

    ``values`` may carry extra trailing axes; the transform acts on axis 0.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != grid.N + 1:
        raise ValueError(f"expected {grid.N + 1} nodal values, got {values.shape[0]}")
    T = _node_basis(grid.N) * grid.ortho_weights[None, :]
    coeffs = np.tensordot(T, values, axes=(1, 0))
    return coeffs / _gamma(grid.N).reshape((-1,) + (1,) * (values.ndim - 1))


def interp_eval(grid: CollocationGrid, values, x: float) -> float:
    """Evaluate the degree-``N`` interpolant of nodal ``values`` at ``x``."""
    x = float(x)
    if not (grid.a <= x <= grid.b):
        raise ValueError(f"x = {x} lies outside [{grid.a}, {grid.b}]")
    values = np.asarray(values, dtype=float)
    hit = np.flatnonzero(grid.nodes == x)
    if hit.size:
        return float(values[hit[0]])
    coeffs = chebyshev_coefficients(grid, values)
    return float(C.chebval(grid.to_reference(x), coeffs))


def interp_matrix(grid: CollocationGrid, x) -> np.ndarray:
    """Matrix ``E`` with ``E @ values`` equal to the interpolant at the points ``x``.

    Rows for points that coincide with a node reduce to the unit vector of
    that node, so node values are reproduced exactly.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < grid.a) or np.any(x > grid.b):
        raise ValueError("interpolation points must lie inside the grid interval")
    N = grid.N
    xi = np.clip(grid.to_reference(x), -1.0, 1.0)
    Tx = np.cos(np.arange(N + 1)[None, :] * np.arccos(xi)[:, None])
    transform = (_node_basis(N) * grid.ortho_weights[None, :]) / _gamma(N)[:, None]
    E = Tx @ transform
    rows, cols = np.nonzero(x[:, None] == grid.nodes[None, :])
    E[rows] = 0.0
    E[rows, cols] = 1.0
    return E
