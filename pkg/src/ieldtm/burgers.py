"""Method-of-lines Burgers system on Chebyshev collocation grids.

The interior nodal solution ``beta`` (shape ``(N-1,)`` in 1D, ``(N-1, M-1)``
in 2D) evolves by

    d beta/dt = eps * (Bx u + u By^T)|_int - beta * (Ax u + u Ay^T)|_int

where ``u`` is ``beta`` extended by the Dirichlet data on the boundary nodes.
Applying the full matrices to the extended field is the same as using the
interior blocks plus the boundary columns (the ``F(t)`` forcing); both forms
are provided, the extended one being the working path.

Time-Taylor coefficients ``beta_bar(k) = beta^(k)(t_i) / k!`` are generated by
the differential-transform recurrence of the semi-discrete system, with the
boundary data entering through its own time-Taylor coefficients.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cheb import CollocationGrid, DiffMatrices, diff_matrix

__all__ = [
    "BoundaryProvider",
    "HomogeneousBoundary",
    "FieldBoundary",
    "PolynomialBoundary",
    "SemiDiscreteSystem",
    "TaylorCoeffs",
    "assemble",
    "initial_field",
    "rhs",
    "rhs_blocks",
    "dt_recurrence",
    "taylor_coefficients",
    "coefficient_tangents",
]

SIDES_1D = ("left", "right")
SIDES_2D = ("left", "right", "bottom", "top")


def _fd_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative on ``offsets`` (unit spacing)."""
    m = len(offsets)
    V = np.vander(offsets, m, increasing=True).T
    rhs_vec = np.zeros(m)
    rhs_vec[order] = math.factorial(order)
    return np.linalg.solve(V, rhs_vec)


class BoundaryProvider:
    """Dirichlet data on the domain edges, with time-Taylor coefficients.

    Sides are ``"left"``/``"right"`` (x = a, x = b) and, in 2D,
    ``"bottom"``/``"top"`` (y = c, y = d). ``coord`` is the coordinate along
    the side (``y`` for left/right, ``x`` for bottom/top) and is ignored in 1D.

    Subclasses implement :meth:`value`. The default :meth:`taylor_series`
    differentiates :meth:`value` numerically with central differences of
    spacing ``fd_step``; expect roughly ``fd_step**2`` relative accuracy on the
    first coefficients and rapid loss beyond order 4. Override it when exact
    coefficients are available.
    """

    fd_step: float = 1e-3

    def value(self, side: str, coord, t: float) -> np.ndarray:
        raise NotImplementedError

    def taylor_series(self, side: str, coord, t: float, order: int) -> np.ndarray:
        """Coefficients ``0..order`` stacked on a new leading axis."""
        h = self.fd_step
        base = np.asarray(self.value(side, coord, t), dtype=float)
        out = np.empty((order + 1,) + base.shape)
        out[0] = base
        for k in range(1, order + 1):
            half = k // 2 + 1
            offsets = np.arange(-half, half + 1, dtype=float)
            w = _fd_weights(offsets, k)
            acc = sum(wj * np.asarray(self.value(side, coord, t + s * h), dtype=float)
                      for wj, s in zip(w, offsets))
            out[k] = acc / (h**k * math.factorial(k))
        return out

    def taylor(self, side: str, coord, t: float, k: int) -> np.ndarray:
        return self.taylor_series(side, coord, t, k)[k]


class HomogeneousBoundary(BoundaryProvider):
    """Zero Dirichlet data."""

    def value(self, side, coord, t):
        return np.zeros(np.shape(coord))

    def taylor_series(self, side, coord, t, order):
        return np.zeros((order + 1,) + np.shape(coord))


class FieldBoundary(BoundaryProvider):
    """Boundary data read off a known field ``u(x, t)`` or ``u(x, y, t)``.

    ``series(x, y, t, order)``, when given, must return the exact
    time-Taylor coefficients of the field at the points, shape
    ``(order + 1,) + broadcast(x, y).shape``; ``y`` is ``None`` in 1D.
    """

    def __init__(self, u: Callable, grids: Sequence[CollocationGrid],
                 series: Callable | None = None, fd_step: float = 1e-3):
        self.u = u
        self.grids = tuple(grids)
        self.series = series
        self.fd_step = fd_step

    def _points(self, side, coord):
        gx = self.grids[0]
        if len(self.grids) == 1:
            x = {"left": gx.a, "right": gx.b}[side]
            return np.asarray(x, dtype=float), None
        gy = self.grids[1]
        coord = np.asarray(coord, dtype=float)
        if side == "left":
            return np.full_like(coord, gx.a), coord
        if side == "right":
            return np.full_like(coord, gx.b), coord
        if side == "bottom":
            return coord, np.full_like(coord, gy.a)
        if side == "top":
            return coord, np.full_like(coord, gy.b)
        raise ValueError(f"unknown side {side!r}")

    def value(self, side, coord, t):
        x, y = self._points(side, coord)
        if y is None:
            return np.asarray(self.u(x, t), dtype=float)
        return np.asarray(self.u(x, y, t), dtype=float)

    def taylor_series(self, side, coord, t, order):
        if self.series is None:
            return super().taylor_series(side, coord, t, order)
        x, y = self._points(side, coord)
        return np.asarray(self.series(x, y, t, order), dtype=float)


class PolynomialBoundary(BoundaryProvider):
    """Data that are polynomial in time: ``g = sum_j c_j(coord) t**j`` per side.

    ``coeffs`` maps each side name to a list of callables ``c_j(coord)``;
    in 1D each callable is called with ``None``.
    """

    def __init__(self, coeffs: dict):
        self.coeffs = coeffs

    def value(self, side, coord, t):
        return self.taylor_series(side, coord, t, 0)[0]

    def taylor_series(self, side, coord, t, order):
        cs = [np.asarray(c(coord), dtype=float) for c in self.coeffs[side]]
        shape = np.broadcast_shapes(np.shape(coord), *(c.shape for c in cs))
        out = np.zeros((order + 1,) + shape)
        for k in range(order + 1):
            for j in range(k, len(cs)):
                out[k] = out[k] + math.comb(j, k) * cs[j] * t ** (j - k)
        return out


@dataclass(frozen=True, eq=False)
class SemiDiscreteSystem:
    """Collocated Burgers right-hand side with Dirichlet data.

    ``advection=False`` drops the nonlinear term, leaving the linear heat
    system; it exists for checks against linear reference steppers.
    """

    dim: int
    eps: float
    grids: tuple
    mats: tuple
    bc: BoundaryProvider
    advection: bool = True
    # interior blocks and boundary columns per axis, filled in __post_init__
    A_int: tuple = field(init=False, repr=False)
    B_int: tuple = field(init=False, repr=False)
    A_bnd: tuple = field(init=False, repr=False)
    B_bnd: tuple = field(init=False, repr=False)

    def __post_init__(self):
        a_int, b_int, a_bnd, b_bnd = [], [], [], []
        for m in self.mats:
            a_int.append(np.ascontiguousarray(m.A[1:-1, 1:-1]))
            b_int.append(np.ascontiguousarray(m.B[1:-1, 1:-1]))
            a_bnd.append(np.ascontiguousarray(m.A[1:-1, [0, -1]]))
            b_bnd.append(np.ascontiguousarray(m.B[1:-1, [0, -1]]))
        object.__setattr__(self, "A_int", tuple(a_int))
        object.__setattr__(self, "B_int", tuple(b_int))
        object.__setattr__(self, "A_bnd", tuple(a_bnd))
        object.__setattr__(self, "B_bnd", tuple(b_bnd))

    @property
    def interior_shape(self) -> tuple:
        return tuple(g.N - 1 for g in self.grids)

    @property
    def size(self) -> int:
        return int(np.prod(self.interior_shape))

    @property
    def interior_nodes(self) -> tuple:
        return tuple(g.interior for g in self.grids)

    def boundary_series(self, t: float, order: int) -> dict:
        """Time-Taylor coefficients of the boundary data at the interior edge nodes."""
        if self.dim == 1:
            return {s: np.asarray(self.bc.taylor_series(s, None, t, order)).reshape(order + 1)
                    for s in SIDES_1D}
        xs, ys = self.interior_nodes
        return {
            "left": self.bc.taylor_series("left", ys, t, order),
            "right": self.bc.taylor_series("right", ys, t, order),
            "bottom": self.bc.taylor_series("bottom", xs, t, order),
            "top": self.bc.taylor_series("top", xs, t, order),
        }

    def boundary_values(self, t: float) -> dict:
        return {s: v[0] for s, v in self.boundary_series(t, 0).items()}

    def extend(self, beta: np.ndarray, bvals: dict) -> np.ndarray:
        """Full nodal field: ``beta`` inside, boundary data on the edges.

        In 2D the four corners are set to zero; no collocation operator
        restricted to interior rows reads them.
        """
        if self.dim == 1:
            return np.concatenate(([bvals["left"]], beta, [bvals["right"]]))
        p, q = self.interior_shape
        u = np.zeros((p + 2, q + 2))
        u[1:-1, 1:-1] = beta
        u[0, 1:-1] = bvals["left"]
        u[-1, 1:-1] = bvals["right"]
        u[1:-1, 0] = bvals["bottom"]
        u[1:-1, -1] = bvals["top"]
        return u

    def derivatives(self, u: np.ndarray) -> tuple:
        """(sum of first derivatives, Laplacian) of an extended field, at interior nodes."""
        if self.dim == 1:
            A, B = self.mats[0].A, self.mats[0].B
            return (A @ u)[1:-1], (B @ u)[1:-1]
        Ax, Bx = self.mats[0].A[1:-1], self.mats[0].B[1:-1]
        Ay, By = self.mats[1].A[1:-1], self.mats[1].B[1:-1]
        core = u[:, 1:-1]
        rows = u[1:-1, :]
        grad = Ax @ core + rows @ Ay.T
        lap = Bx @ core + rows @ By.T
        return grad, lap

    def interior_ops(self, v: np.ndarray) -> tuple:
        """Interior-block (sum of first derivatives, Laplacian) of ``v``.

        ``v`` may carry leading batch axes; the spatial axes are the last
        ``dim`` axes. Boundary data are not included.
        """
        if self.dim == 1:
            (A,), (B,) = self.A_int, self.B_int
            return v @ A.T, v @ B.T
        Ax, Ay = self.A_int
        Bx, By = self.B_int
        return Ax @ v + v @ Ay.T, Bx @ v + v @ By.T

    def check_shape(self, beta: np.ndarray) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != self.interior_shape:
            raise ValueError(f"field has shape {beta.shape}, system expects {self.interior_shape}")
        return beta


@dataclass
class TaylorCoeffs:
    """Local time-Taylor coefficients of the interior field about ``t``.

    ``coeffs[k]`` holds ``beta_bar(k)``; the array has shape
    ``(order + 1,) + interior_shape``.
    """

    t: float
    coeffs: np.ndarray

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def evaluate(self, h: float, order: int | None = None) -> np.ndarray:
        """Taylor polynomial at ``t + h`` truncated at ``order`` (Horner)."""
        K = self.order if order is None else order
        acc = self.coeffs[K].copy()
        for k in range(K - 1, -1, -1):
            acc = acc * h + self.coeffs[k]
        return acc


def assemble(dim: int, grids: Sequence[CollocationGrid], eps: float,
             bc: BoundaryProvider | None = None, advection: bool = True) -> SemiDiscreteSystem:
    """Build the semi-discrete Burgers system on tensor Lobatto grids."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    grids = tuple(grids)
    if len(grids) != dim:
        raise ValueError(f"need {dim} grid(s), got {len(grids)}")
    if not eps > 0:
        raise ValueError(f"viscosity must be positive, got {eps}")
    bc = HomogeneousBoundary() if bc is None else bc
    mats = tuple(diff_matrix(g) for g in grids)
    system = SemiDiscreteSystem(dim=dim, eps=float(eps), grids=grids, mats=mats,
                                bc=bc, advection=advection)
    if dim == 2:
        _check_corners(system)
    return system


def _check_corners(system: SemiDiscreteSystem, t: float = 0.0, atol: float = 1e-8):
    gx, gy = system.grids
    bc = system.bc
    pairs = [
        (("left", gy.a), ("bottom", gx.a)),
        (("left", gy.b), ("top", gx.a)),
        (("right", gy.a), ("bottom", gx.b)),
        (("right", gy.b), ("top", gx.b)),
    ]
    for (s1, c1), (s2, c2) in pairs:
        v1 = float(np.asarray(bc.value(s1, np.array([c1]), t)).ravel()[0])
        v2 = float(np.asarray(bc.value(s2, np.array([c2]), t)).ravel()[0])
        if abs(v1 - v2) > atol:
            warnings.warn(f"boundary data disagree at the {s1}/{s2} corner: {v1} vs {v2}",
                          stacklevel=3)


def initial_field(system: SemiDiscreteSystem, g: Callable) -> np.ndarray:
    """Sample the initial condition ``g`` at the interior nodes.

    The boundary samples of ``g`` are compared against the boundary data at
    ``t = 0``; a mismatch above 1e-8 raises a warning but is not repaired.
    """
    if system.dim == 1:
        x = system.grids[0].nodes
        full = np.asarray(g(x), dtype=float) * np.ones_like(x)
        expected = system.boundary_values(0.0)
        edge_err = max(abs(full[0] - expected["left"]), abs(full[-1] - expected["right"]))
    else:
        X, Y = np.meshgrid(system.grids[0].nodes, system.grids[1].nodes, indexing="ij")
        full = np.asarray(g(X, Y), dtype=float) * np.ones_like(X)
        expected = system.boundary_values(0.0)
        edge_err = max(
            np.max(np.abs(full[0, 1:-1] - expected["left"])),
            np.max(np.abs(full[-1, 1:-1] - expected["right"])),
            np.max(np.abs(full[1:-1, 0] - expected["bottom"])),
            np.max(np.abs(full[1:-1, -1] - expected["top"])),
        )
    if edge_err > 1e-8:
        warnings.warn(f"initial condition differs from boundary data by {edge_err:.3e}",
                      stacklevel=2)
    interior = (slice(1, -1),) * system.dim
    return np.ascontiguousarray(full[interior])


def rhs(system: SemiDiscreteSystem, beta: np.ndarray, t: float) -> np.ndarray:
    """Time derivative of the interior field."""
    beta = system.check_shape(beta)
    u = system.extend(beta, system.boundary_values(t))
    grad, lap = system.derivatives(u)
    out = system.eps * lap
    if system.advection:
        out = out - beta * grad
    return out


def _forcing(system: SemiDiscreteSystem, bvals: dict) -> tuple:
    """Boundary-column contributions to (first-derivative sum, Laplacian) at interior nodes."""
    if system.dim == 1:
        g = np.array([bvals["left"], bvals["right"]])
        return system.A_bnd[0] @ g, system.B_bnd[0] @ g
    Axb, Ayb = system.A_bnd
    Bxb, Byb = system.B_bnd
    gx = np.vstack([bvals["left"], bvals["right"]])    # (2, q)
    gy = np.vstack([bvals["bottom"], bvals["top"]])    # (2, p)
    grad = Axb @ gx + (Ayb @ gy).T
    lap = Bxb @ gx + (Byb @ gy).T
    return grad, lap


def rhs_blocks(system: SemiDiscreteSystem, beta: np.ndarray, t: float) -> np.ndarray:
    """Same right-hand side written with interior blocks and explicit boundary forcing.

    ``eps * (Bx beta + beta By^T + F_diff) - beta * (Ax beta + beta Ay^T + F_adv)``.
    """
    beta = system.check_shape(beta)
    f_adv, f_diff = _forcing(system, system.boundary_values(t))
    grad, lap = system.interior_ops(beta)
    out = system.eps * (lap + f_diff)
    if system.advection:
        out = out - beta * (grad + f_adv)
    return out


def _bvals_at(series: dict, k: int) -> dict:
    return {s: v[k] for s, v in series.items()}


def dt_recurrence(system: SemiDiscreteSystem, tc: TaylorCoeffs, k: int) -> np.ndarray:
    """Coefficient ``beta_bar(k + 1)`` from ``tc.coeffs[0..k]``.

    This is the one-level form; :func:`taylor_coefficients` runs the whole
    recurrence while reusing the derivative fields of earlier levels.
    """
    if k < 0:
        raise ValueError("transform order must be non-negative")
    if tc.coeffs.shape[0] < k + 1:
        raise ValueError(f"need coefficients 0..{k}, have 0..{tc.coeffs.shape[0] - 1}")
    series = system.boundary_series(tc.t, k)
    grads = []
    lap_k = None
    for j in range(k + 1):
        u = system.extend(tc.coeffs[j], _bvals_at(series, j))
        grad, lap = system.derivatives(u)
        grads.append(grad)
        if j == k:
            lap_k = lap
    out = system.eps * lap_k
    if system.advection:
        out = out - sum(tc.coeffs[s] * grads[k - s] for s in range(k + 1))
    return out / (k + 1)


def taylor_coefficients(system: SemiDiscreteSystem, beta0: np.ndarray, t: float,
                        order: int) -> TaylorCoeffs:
    """All coefficients ``beta_bar(0..order)`` about ``t`` with ``beta_bar(0) = beta0``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    beta0 = system.check_shape(beta0)
    series = system.boundary_series(t, max(order - 1, 0))
    coeffs = np.empty((order + 1,) + system.interior_shape)
    coeffs[0] = beta0
    grads = []
    for k in range(order):
        u = system.extend(coeffs[k], _bvals_at(series, k))
        grad, lap = system.derivatives(u)
        grads.append(grad)
        nxt = system.eps * lap
        if system.advection:
            conv = coeffs[0] * grads[k]
            for s in range(1, k + 1):
                conv = conv + coeffs[s] * grads[k - s]
            nxt = nxt - conv
        coeffs[k + 1] = nxt / (k + 1)
    return TaylorCoeffs(t=float(t), coeffs=coeffs)


def coefficient_tangents(system: SemiDiscreteSystem, tc: TaylorCoeffs,
                         order: int | None = None) -> np.ndarray:
    """Exact derivatives of ``beta_bar(k)`` with respect to ``beta_bar(0)``.

    Returns an array ``J`` of shape ``(order + 1, n, n)`` where
    ``J[k, i, j] = d beta_bar(k)_i / d beta_bar(0)_j`` over the flattened
    (C-order) interior field of size ``n``. The recurrence is linearised and
    propagated for all unit directions at once; boundary data are constant
    with respect to the unknowns and drop out.
    """
    K = tc.order if order is None else order
    n = system.size
    shape = system.interior_shape
    # tangent batches, direction first: T[k] has shape (n,) + shape
    T = np.empty((K + 1, n) + shape)
    T[0] = np.eye(n).reshape((n,) + shape)
    if K > 0 and system.advection:
        series = system.boundary_series(tc.t, K - 1)
        grads = []
        for k in range(K):
            u = system.extend(tc.coeffs[k], _bvals_at(series, k))
            grads.append(system.derivatives(u)[0])
    dgrads = []
    for k in range(K):
        dgrad, dlap = system.interior_ops(T[k])
        dgrads.append(dgrad)
        nxt = system.eps * dlap
        if system.advection:
            for s in range(k + 1):
                nxt -= T[s] * grads[k - s] + tc.coeffs[s] * dgrads[k - s]
        T[k + 1] = nxt / (k + 1)
    # (K+1, dir, out...) -> (K+1, out, dir)
    return T.reshape(K + 1, n, n).transpose(0, 2, 1)
