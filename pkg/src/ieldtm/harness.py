"""Experiment runner: builds a Burgers problem, integrates it and reports errors.

Two problems are wired in:

* ``burgers1d``: ``u(x, 0) = sin(pi x)`` on ``[0, 1]`` with zero Dirichlet
  data, compared against the Cole-Hopf series.
* ``burgers2d``: the logistic traveling front on ``[0, 1]^2``; initial and
  boundary data are taken from the exact solution.

All outputs are written atomically. Floats in CSV files carry 17 significant
digits and JSON is written with sorted keys, so two identical runs produce
identical files. Wall-clock time goes to ``timing.json`` for that reason.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .burgers import (FieldBoundary, HomogeneousBoundary, SemiDiscreteSystem, assemble,
                      initial_field, rhs)
from .cheb import collocation_points, interp_matrix
from .integrator import (IntegratorConfig, RunReport, StepFailure, integrate_adaptive,
                         integrate_fixed, order_estimate)
from .oracle import (OracleError, exact_1d, fourier_coefficients, logistic_series,
                     traveling_wave)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ErrorSummary",
    "Problem",
    "ConvergenceTable",
    "build_problem",
    "run",
    "converge",
    "profile_snapshots",
    "sample_profile",
    "overshoot",
    "diagonal_section",
]

PROBLEMS = ("burgers1d", "burgers2d")
REFERENCES = ("exact", "semidiscrete")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())
    return Path(path)


def _write_json(path: Path, obj) -> Path:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return Path(path)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. Set ``dt`` for fixed stepping or ``tol`` for adaptive stepping.

    ``report_points`` are off-node locations where the computed and exact
    solutions are tabulated: floats in 1D, ``(x, y)`` pairs in 2D. ``M``
    defaults to ``N``.
    """

    problem: str = "burgers1d"
    eps: float = 0.1
    N: int = 20
    M: int | None = None
    theta: float = 0.5
    K: int = 1
    dt: float | None = None
    tol: float | None = None
    t_f: float = 0.1
    report_points: tuple = ()
    output_dir: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if not (isinstance(self.eps, (int, float)) and self.eps > 0):
            raise ConfigError(f"eps must be positive, got {self.eps}")
        for name in ("N", "M"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 2):
                raise ConfigError(f"{name} must be an integer >= 2, got {v}")
        if self.problem == "burgers1d" and self.M is not None:
            raise ConfigError("M only applies to burgers2d")
        if not self.t_f >= 0:
            raise ConfigError(f"t_f must be non-negative, got {self.t_f}")
        pts = tuple(tuple(float(c) for c in p) if np.ndim(p) else float(p)
                    for p in self.report_points)
        object.__setattr__(self, "report_points", pts)
        for p in pts:
            coords = p if isinstance(p, tuple) else (p,)
            if len(coords) != self.dim:
                raise ConfigError(f"report point {p} does not match dimension {self.dim}")
            if any(not 0.0 <= c <= 1.0 for c in coords):
                raise ConfigError(f"report point {p} lies outside the unit domain")
        try:
            self.integrator()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def dim(self) -> int:
        return 1 if self.problem == "burgers1d" else 2

    @property
    def mode(self) -> str:
        return "fixed" if self.dt is not None else "adaptive"

    @property
    def degrees(self) -> tuple:
        if self.dim == 1:
            return (int(self.N),)
        return (int(self.N), int(self.M if self.M is not None else self.N))

    def integrator(self, **overrides) -> IntegratorConfig:
        kw = dict(theta=float(self.theta), K=int(self.K), dt=self.dt, tol=self.tol)
        kw.update(overrides)
        return IntegratorConfig(**kw)

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ExperimentConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["report_points"] = [list(p) if isinstance(p, tuple) else p for p in self.report_points]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "report_points" in d:
            d["report_points"] = tuple(tuple(p) if isinstance(p, (list, tuple)) else p
                                       for p in d["report_points"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class Problem:
    """A discretized test problem together with its exact solution."""

    system: SemiDiscreteSystem
    beta0: np.ndarray
    exact: Callable      # exact(coords: tuple of arrays, t) -> array
    data_range: Callable  # data_range(t_f) -> (lo, hi) of initial and boundary data
    metadata: dict = field(default_factory=dict)  # oracle choices reported in summary.json


def _grids(cfg: ExperimentConfig):
    return [collocation_points(0.0, 1.0, n) for n in cfg.degrees]


def build_problem(cfg: ExperimentConfig) -> Problem:
    grids = _grids(cfg)
    if cfg.dim == 1:
        system = assemble(1, grids, cfg.eps, HomogeneousBoundary())
        beta0 = initial_field(system, lambda x: np.sin(np.pi * x))
        cache = {}

        def exact(coords, t):
            if "sol" not in cache:
                cache["sol"] = fourier_coefficients(cfg.eps)
            return np.asarray(exact_1d(cache["sol"], coords[0], t))

        return Problem(system, beta0, exact, lambda t_f: (0.0, 1.0))

    tw = traveling_wave(cfg.eps)
    bc = FieldBoundary(tw, grids, series=lambda x, y, t, order: logistic_series(tw, x, y, t, order))
    system = assemble(2, grids, cfg.eps, bc)
    beta0 = initial_field(system, lambda x, y: tw(x, y, 0.0))

    def exact(coords, t):
        return np.asarray(tw(coords[0], coords[1], t))

    def data_range(t_f):
        x, y = grids[0].nodes, grids[1].nodes
        X, Y = np.meshgrid(x, y, indexing="ij")
        vals = [tw(X, Y, 0.0).ravel()]
        # boundary data are monotone in t, so the end points of the run bound them
        for t in (0.0, t_f):
            vals += [tw(0.0, y, t), tw(1.0, y, t), tw(x, 0.0, t), tw(x, 1.0, t)]
        allv = np.concatenate([np.ravel(v) for v in vals])
        return float(allv.min()), float(allv.max())

    meta = {"exponent_scale": tw.scale_label, "exponent_scale_value": tw.exponent_scale}
    return Problem(system, beta0, exact, data_range, meta)


@dataclass
class ErrorSummary:
    """Errors and bookkeeping of one run.

    ``values_at_points`` holds ``(point, computed, exact)`` triples for the
    configured report points. ``wall_time`` is excluded from
    :meth:`to_dict` so that summaries are reproducible.
    """

    linf_on_nodes: float
    values_at_points: list = field(default_factory=list)
    step_count: int = 0
    rejected_count: int = 0
    final_time: float = 0.0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "linf_on_nodes": self.linf_on_nodes,
            "values_at_points": [
                {"point": list(p) if isinstance(p, tuple) else p, "computed": c, "exact": e}
                for p, c, e in self.values_at_points
            ],
            "step_count": self.step_count,
            "rejected_count": self.rejected_count,
            "final_time": self.final_time,
        }


def full_field(system: SemiDiscreteSystem, beta: np.ndarray, t: float) -> np.ndarray:
    """Nodal values on the whole grid, with exact-data corners in 2D."""
    full = system.extend(beta, system.boundary_values(t))
    if system.dim == 2 and isinstance(system.bc, FieldBoundary):
        for i in (0, -1):
            for j in (0, -1):
                x, y = system.grids[0].nodes[i], system.grids[1].nodes[j]
                full[i, j] = float(system.bc.u(x, y, t))
    return full


def _evaluate_points(system: SemiDiscreteSystem, full: np.ndarray, points) -> np.ndarray:
    """Interpolant of ``full`` at off-node report points (never nearest-node)."""
    if not points:
        return np.empty(0)
    if system.dim == 1:
        E = interp_matrix(system.grids[0], np.asarray(points, dtype=float))
        return E @ full
    pts = np.asarray(points, dtype=float)
    Ex = interp_matrix(system.grids[0], pts[:, 0])
    Ey = interp_matrix(system.grids[1], pts[:, 1])
    return np.einsum("pi,ij,pj->p", Ex, full, Ey)


def _integrate(problem: Problem, cfg: ExperimentConfig, t_f: float, beta0=None,
               t0: float = 0.0) -> RunReport:
    beta0 = problem.beta0 if beta0 is None else beta0
    icfg = cfg.integrator()
    if cfg.mode == "fixed":
        return integrate_fixed(problem.system, beta0, t_f, icfg, t0=t0)
    return integrate_adaptive(problem.system, beta0, t_f, icfg, t0=t0)


def _interior_coords(system: SemiDiscreteSystem):
    if system.dim == 1:
        return (system.grids[0].interior,)
    return tuple(np.meshgrid(*system.interior_nodes, indexing="ij"))


def run(config: ExperimentConfig, write: bool = True) -> ErrorSummary:
    """Integrate ``config`` to ``t_f`` and compare against the exact solution.

    With ``write`` and an ``output_dir`` the files ``summary.json``,
    ``solution.csv`` (full nodal field at ``t_f``), ``steps.csv`` and
    ``timing.json`` are produced. Solver failures propagate as
    :class:`StepFailure`. If the exact solution cannot be evaluated (the
    Fourier series cancels for very small ``eps``) the errors are NaN and
    the reason is stored under ``oracle`` in ``summary.json``.
    """
    start = time.perf_counter()
    problem = build_problem(config)
    system = problem.system
    report = _integrate(problem, config, config.t_f)
    beta = report.final_field
    t_f = report.final_time
    meta = dict(problem.metadata)
    exact = problem.exact
    try:
        exact_nodes = exact(_interior_coords(system), t_f)
    except OracleError as exc:
        # the series oracle breaks down for very small eps; report the run without errors
        meta["oracle_error"] = str(exc)
        exact_nodes = np.full(system.interior_shape, math.nan)
        exact = lambda coords, t: math.nan
    linf = float(np.max(np.abs(beta - exact_nodes)))
    full = full_field(system, beta, t_f)
    pts = list(config.report_points)
    computed = _evaluate_points(system, full, pts)
    values = []
    for p, c in zip(pts, computed):
        coords = p if isinstance(p, tuple) else (p,)
        values.append((p, float(c), float(exact(coords, t_f))))
    summary = ErrorSummary(linf_on_nodes=linf, values_at_points=values,
                           step_count=report.step_count, rejected_count=report.rejected_count,
                           final_time=float(t_f), wall_time=time.perf_counter() - start)
    if write and config.output_dir:
        out = Path(config.output_dir)
        _write_solution(out / "solution.csv", system, full)
        _write_steps(out / "steps.csv", report)
        doc = {"config": config.to_dict(), **summary.to_dict()}
        if meta:
            doc["oracle"] = meta
        _write_json(out / "summary.json", doc)
        _write_json(out / "timing.json", {"wall_time": summary.wall_time})
    return summary


def _write_solution(path: Path, system: SemiDiscreteSystem, full: np.ndarray) -> Path:
    if system.dim == 1:
        return _write_csv(path, ["x", "u"], zip(system.grids[0].nodes, full))
    X, Y = np.meshgrid(system.grids[0].nodes, system.grids[1].nodes, indexing="ij")
    return _write_csv(path, ["x", "y", "u"], zip(X.ravel(), Y.ravel(), full.ravel()))


def _write_steps(path: Path, report: RunReport) -> Path:
    rows = ((s.t, s.dt_used, s.newton_iters, s.error_estimate, int(s.accepted), s.residual)
            for s in report.steps)
    return _write_csv(path, ["t", "dt", "newton_iters", "error_estimate", "accepted",
                             "residual"], rows)


@dataclass
class ConvergenceTable:
    """Errors of a step-size sweep. ``order`` is NaN when a run was unstable."""

    dts: list
    linf: list
    order: float
    stable: bool

    def local_orders(self) -> list:
        out = [math.nan]
        for i in range(1, len(self.dts)):
            e0, e1 = self.linf[i - 1], self.linf[i]
            if e0 > 0 and e1 > 0 and math.isfinite(e0) and math.isfinite(e1):
                out.append(math.log(e0 / e1) / math.log(self.dts[i - 1] / self.dts[i]))
            else:
                out.append(math.nan)
        return out


def _semidiscrete_reference(problem: Problem, t_f: float) -> np.ndarray:
    """Stiff high-accuracy solution of the method-of-lines system (time error only)."""
    from scipy.integrate import solve_ivp

    system = problem.system
    shape = system.interior_shape
    sol = solve_ivp(lambda t, y: rhs(system, y.reshape(shape), t).ravel(), (0.0, t_f),
                    problem.beta0.ravel(), method="Radau", rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise StepFailure(f"reference solve failed: {sol.message}")
    return sol.y[:, -1].reshape(shape)


def converge(config: ExperimentConfig, dt_list: Sequence[float], reference: str = "exact",
             write: bool = True) -> ConvergenceTable:
    """Fixed-step sweep over ``dt_list`` with a least-squares order estimate.

    ``reference="exact"`` measures against the exact solution at the
    interior nodes, which includes the spatial error. ``"semidiscrete"``
    measures against a tight stiff solve of the same semi-discrete system,
    isolating the time-stepping error. A run that fails or whose error
    grows under refinement marks the table unstable with a NaN order.
    Writes ``convergence.csv`` to ``output_dir``.
    """
    dts = [float(d) for d in dt_list]
    if len(dts) < 3:
        raise ConfigError("need at least three step sizes")
    if any(d <= 0 for d in dts) or any(b >= a for a, b in zip(dts, dts[1:])):
        raise ConfigError("step sizes must be positive and strictly decreasing")
    if reference not in REFERENCES:
        raise ConfigError(f"reference must be one of {REFERENCES}, got {reference!r}")
    base = config.replace(dt=dts[0], tol=None)
    problem = build_problem(base)
    if reference == "exact":
        ref = problem.exact(_interior_coords(problem.system), base.t_f)
    else:
        ref = _semidiscrete_reference(problem, base.t_f)
    errors = []
    for dt in dts:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                report = _integrate(problem, base.replace(dt=dt), base.t_f)
            err = float(np.max(np.abs(report.final_field - ref)))
        except StepFailure:
            err = math.nan
        errors.append(err if math.isfinite(err) else math.nan)
    stable = all(math.isfinite(e) for e in errors) and all(
        b <= a for a, b in zip(errors, errors[1:]))
    order = order_estimate(errors, dts) if stable and all(e > 0 for e in errors) else math.nan
    table = ConvergenceTable(dts=dts, linf=errors, order=order, stable=stable)
    if write and config.output_dir:
        rows = [("run", d, e, o) for d, e, o in zip(dts, errors, table.local_orders())]
        rows.append(("fit", math.nan, math.nan, order))
        _write_csv(Path(config.output_dir) / "convergence.csv", ["kind", "dt", "linf", "order"],
                   rows)
    return table


def sample_profile(system: SemiDiscreteSystem, full: np.ndarray, points: int = 400) -> tuple:
    """Interpolant of the nodal field on ``points`` uniform samples per axis.

    Returns ``(axes, values)``; ``values`` has shape ``(points,)`` or
    ``(points, points)``.
    """
    axes = tuple(np.linspace(g.a, g.b, points) for g in system.grids)
    if system.dim == 1:
        return axes, interp_matrix(system.grids[0], axes[0]) @ full
    Ex = interp_matrix(system.grids[0], axes[0])
    Ey = interp_matrix(system.grids[1], axes[1])
    return axes, Ex @ full @ Ey.T


def overshoot(values, data_range: tuple, fraction: float = 0.005) -> float:
    """Largest excursion of ``values`` beyond the data range widened by ``fraction`` of its size.

    Zero means the profile stays inside the band.
    """
    lo, hi = data_range
    pad = fraction * (hi - lo)
    v = np.asarray(values, dtype=float)
    return float(max(0.0, lo - pad - v.min(), v.max() - hi - pad))


def diagonal_section(system: SemiDiscreteSystem, full: np.ndarray, points: int = 400) -> tuple:
    """Interpolated values along ``x = y``; returns ``(s, values)`` with ``s`` the common coordinate."""
    if system.dim != 2:
        raise ValueError("diagonal sections need a 2D field")
    s = np.linspace(0.0, 1.0, points)
    return s, _evaluate_points(system, full, list(zip(s, s)))


@dataclass
class Snapshot:
    t: float
    axes: tuple
    values: np.ndarray
    full: np.ndarray
    path: Path | None = None


def profile_snapshots(config: ExperimentConfig, times: Sequence[float], points: int = 400,
                      write: bool = True) -> list:
    """Dense profiles at each of ``times`` (increasing, within ``[0, t_f]``).

    The run is advanced from one requested time to the next. Each profile is
    the interpolant sampled on ``points`` uniform points per axis and is
    written to ``profiles_<t>.csv`` when ``output_dir`` is set.
    """
    times = [float(t) for t in times]
    if not times:
        raise ConfigError("need at least one snapshot time")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("snapshot times must be strictly increasing")
    if times[0] < 0 or times[-1] > config.t_f * (1 + 1e-12):
        raise ConfigError("snapshot times must lie in [0, t_f]")
    problem = build_problem(config)
    system = problem.system
    beta, t = problem.beta0, 0.0
    out = []
    for ts in times:
        if ts > t:
            report = _integrate(problem, config, ts, beta0=beta, t0=t)
            beta, t = report.final_field, ts
        full = full_field(system, beta, t)
        axes, values = sample_profile(system, full, points)
        snap = Snapshot(t=t, axes=axes, values=values, full=full)
        if write and config.output_dir:
            path = Path(config.output_dir) / f"profiles_{ts:g}.csv"
            if system.dim == 1:
                rows = zip(axes[0], values)
                header = ["x", "u"]
            else:
                X, Y = np.meshgrid(*axes, indexing="ij")
                rows = zip(X.ravel(), Y.ravel(), values.ravel())
                header = ["x", "y", "u"]
            snap.path = _write_csv(path, header, rows)
        out.append(snap)
    return out
