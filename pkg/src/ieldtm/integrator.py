"""Implicit-explicit local differential transform (IELDTM) time stepping.

Each step matches the order-``K`` Taylor polynomial expanded about ``t_i``
with the one expanded about ``t_{i+1}`` at the interior point
``t_i + (1 - theta) dt``:

    sum_k b_{i+1}(k) (-theta dt)^k = sum_k b_i(k) ((1 - theta) dt)^k

``theta = 0`` is the explicit Taylor method, ``theta = 1`` the backward one,
and ``theta = 1/2`` the centred scheme (Crank-Nicolson when ``K = 1``).
For ``theta > 0`` the matching equation is solved for ``b_{i+1}(0)`` with a
modified Newton iteration using the exact linearisation of the coefficient
recurrence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .burgers import SemiDiscreteSystem, TaylorCoeffs, coefficient_tangents, taylor_coefficients

__all__ = [
    "IntegratorConfig",
    "StepRecord",
    "RunReport",
    "StepFailure",
    "Stepper",
    "local_coefficients",
    "continuity_residual",
    "solve_step",
    "integrate_fixed",
    "integrate_adaptive",
    "stability_function",
    "error_constant",
    "step_bound",
    "order_estimate",
]

logger = logging.getLogger(__name__)

_MIN_DAMPING = 2.0**-12
# relative residual below which the explicit Taylor predictor is used as the Newton seed as is
_SEED_ACCEPT = 1e-3
# rebuild the Newton matrix when a stale iteration contracts less than this
_REFRESH_CONTRACTION = 0.25
# damped iterations tolerated in a direct solve before switching to continuation
_MAX_DAMPED = 3
# shortest continuation stage, as a fraction of the step
_MIN_STAGE = 2.0**-6


class StepFailure(RuntimeError):
    """A time step could not be completed (Newton failure, divergence, step underflow)."""

    def __init__(self, message: str, t: float | None = None, dt: float | None = None):
        super().__init__(message)
        self.t = t
        self.dt = dt


@dataclass(frozen=True)
class IntegratorConfig:
    """Settings for one integration run.

    Exactly one of ``dt`` (fixed stepping) and ``tol`` (adaptive stepping)
    must be given.
    """

    theta: float = 0.5
    K: int = 1
    dt: float | None = None
    tol: float | None = None
    newton_tol: float = 1e-12
    newton_max_iter: int = 25
    safety: float = 0.8
    dt_min: float = 1e-12
    dt_max: float = math.inf
    max_rejects: int = 60

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"transform order K must be an integer >= 1, got {self.K}")
        if (self.dt is None) == (self.tol is None):
            raise ValueError("set exactly one of dt (fixed mode) or tol (adaptive mode)")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not 0.0 < self.safety <= 1.0:
            raise ValueError(f"safety must lie in (0, 1], got {self.safety}")
        if not 0.0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")

    @property
    def mode(self) -> str:
        return "fixed" if self.dt is not None else "adaptive"

    @property
    def boosted(self) -> bool:
        """Centred scheme with odd K, which gains one order of accuracy."""
        return self.theta == 0.5 and self.K % 2 == 1


@dataclass
class StepRecord:
    t: float                # time at the end of the step
    dt_used: float
    newton_iters: int
    error_estimate: float   # local estimate compared against tol (nan in fixed mode)
    accepted: bool
    residual: float = 0.0   # max-norm of the matching residual at the returned solution


@dataclass
class RunReport:
    steps: list = field(default_factory=list)
    final_field: np.ndarray | None = None
    final_time: float = 0.0
    max_error_vs_oracle: float | None = None

    @property
    def step_count(self) -> int:
        return sum(1 for s in self.steps if s.accepted)

    @property
    def rejected_count(self) -> int:
        return sum(1 for s in self.steps if not s.accepted)


def local_coefficients(system: SemiDiscreteSystem, beta0: np.ndarray, t_i: float,
                       order: int) -> TaylorCoeffs:
    """Local transform coefficients ``0..order`` of the solution through ``beta0`` at ``t_i``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    return taylor_coefficients(system, beta0, t_i, order)


def _powers(h: float, K: int) -> np.ndarray:
    return h ** np.arange(K + 1)


def continuity_residual(tc_i: TaylorCoeffs, tc_next: TaylorCoeffs, theta: float, dt: float,
                        K: int | None = None) -> np.ndarray:
    """Mismatch of the two local polynomials at ``t_i + (1 - theta) dt``.

    Both coefficient sets are truncated at ``K`` (default: the common order).
    """
    if K is None:
        if tc_i.order != tc_next.order:
            raise ValueError(f"order mismatch: {tc_i.order} vs {tc_next.order}")
        K = tc_i.order
    elif tc_i.order < K or tc_next.order < K:
        raise ValueError(f"coefficient sets do not reach order {K}")
    left = np.tensordot(_powers(-theta * dt, K), tc_next.coeffs[:K + 1], axes=1)
    right = np.tensordot(_powers((1.0 - theta) * dt, K), tc_i.coeffs[:K + 1], axes=1)
    return left - right


def stability_function(theta: float, K: int, z):
    """Amplification factor of the method on ``u' = lambda u`` with ``z = lambda dt``.

    Accepts scalars or arrays. Raises ``ZeroDivisionError`` at a pole.
    """
    z = np.asarray(z, dtype=complex)
    fact = np.array([math.factorial(k) for k in range(K + 1)], dtype=float)
    num = np.zeros_like(z)
    den = np.zeros_like(z)
    for k in range(K, -1, -1):
        num = num * ((1.0 - theta) * z) + 1.0 / fact[k]
        den = den * (-theta * z) + 1.0 / fact[k]
    if np.any(den == 0):
        raise ZeroDivisionError("z is a pole of the stability function")
    out = num / den
    return out[()] if out.ndim == 0 else out


def error_constant(theta: float, K: int) -> float:
    """Leading constant of the local error bound used by the step controller."""
    if theta == 0.5 and K % 2 == 1:
        return abs(0.5 ** (K + 1) * (K + 1))
    return abs((1.0 - theta) ** (K + 1) - (-theta) ** (K + 1))


def _bound_terms(tc: TaylorCoeffs, cfg: IntegratorConfig) -> tuple:
    """(coefficient norm, exponent) entering the step-size bound."""
    if cfg.boosted:
        return float(np.max(np.abs(tc.coeffs[cfg.K + 2]))), cfg.K + 1
    return float(np.max(np.abs(tc.coeffs[cfg.K + 1]))), cfg.K


def step_bound(tc: TaylorCoeffs, cfg: IntegratorConfig) -> float:
    """Largest admissible step at the expansion point of ``tc`` for ``cfg.tol``.

    For the centred scheme with odd ``K`` this is
    ``(tol / (c ||b(K+2)||))**(1/(K+1))``, otherwise
    ``(tol / (c ||b(K+1)||))**(1/K)``; see :func:`error_constant` for ``c``.
    Returns ``inf`` when the denominator vanishes.
    """
    norm, p = _bound_terms(tc, cfg)
    denom = error_constant(cfg.theta, cfg.K) * norm
    if denom == 0.0 or not np.isfinite(denom):
        return math.inf if denom == 0.0 else 0.0
    return (cfg.tol / denom) ** (1.0 / p)


def _error_estimate(tc: TaylorCoeffs, cfg: IntegratorConfig, dt: float) -> float:
    norm, p = _bound_terms(tc, cfg)
    return error_constant(cfg.theta, cfg.K) * norm * dt**p


class Stepper:
    """Advances the semi-discrete system one IELDTM step at a time.

    Holds the factorised Newton matrix between calls so that it can be
    reused across iterations and steps (modified Newton). The matrix is
    rebuilt when the step size changes, when an iteration contracts by less
    than a factor of 4, or when a full step with a stale matrix fails the
    monotonicity test. With a fresh matrix the step is halved until the
    simplified Newton correction ``M^{-1} r`` at the trial point is smaller
    than the current correction (natural monotonicity test). Measuring
    progress through ``M^{-1}`` keeps stiff components, whose residuals are
    scaled by large powers of ``dt``, from dominating the damping decision.

    For large ``|lambda dt|`` the matching equation is a high-degree
    polynomial system and a direct solve from the predictor can wander off.
    If the direct solve fails or keeps needing damping, the root is traced
    from ``dt = 0`` (where it is ``beta_i``) out to the full step instead.

    The stopping test is ``||r|| <= newton_tol (1 + ||beta||)``. When the
    residual has hit its rounding floor above that level (no decrease along
    a fresh Newton direction, or a full contracting correction below the
    same tolerance that no longer halves the residual), the iterate is
    accepted.
    """

    def __init__(self, system: SemiDiscreteSystem, cfg: IntegratorConfig):
        self.system = system
        self.cfg = cfg
        self.coeff_order = cfg.K + 2 if cfg.mode == "adaptive" else cfg.K
        self._lu = None
        self._lu_dt = None
        self.jacobian_builds = 0

    def coefficients(self, beta: np.ndarray, t: float) -> TaylorCoeffs:
        # overflow on a diverging state is detected by the caller via isfinite
        with np.errstate(over="ignore", invalid="ignore"):
            return taylor_coefficients(self.system, beta, t, self.coeff_order)

    def _factorize(self, tc: TaylorCoeffs, dt: float):
        K, theta = self.cfg.K, self.cfg.theta
        J = coefficient_tangents(self.system, tc, K)
        M = np.tensordot(_powers(-theta * dt, K), J, axes=1)
        if not np.all(np.isfinite(M)):
            raise StepFailure("Newton matrix is not finite", tc.t - dt, dt)
        self._lu = lu_factor(M, check_finite=False)
        self._lu_dt = dt
        self.jacobian_builds += 1

    def _linear_seed(self, tc_i: TaylorCoeffs, dt: float) -> np.ndarray:
        n = self.system.size
        jac = coefficient_tangents(self.system, tc_i, 1)[1]
        lhs = np.eye(n) - self.cfg.theta * dt * jac
        incr = np.linalg.solve(lhs, dt * tc_i.coeffs[1].reshape(n))
        return tc_i.coeffs[0] + incr.reshape(self.system.interior_shape)

    def step(self, tc_i: TaylorCoeffs, dt: float) -> tuple:
        """One step of size ``dt`` from the expansion ``tc_i``.

        Returns ``(tc_next, newton_iters, residual_norm)`` where ``tc_next``
        is expanded about ``tc_i.t + dt`` at the new solution.
        """
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        cfg = self.cfg
        K = cfg.K
        with np.errstate(over="ignore", invalid="ignore"):
            predictor = tc_i.evaluate(dt, K)
        if not np.all(np.isfinite(predictor)):
            raise StepFailure("Taylor predictor overflowed", tc_i.t, dt)
        if cfg.theta == 0.0:
            tc = self.coefficients(predictor, tc_i.t + dt)
            if not np.all(np.isfinite(tc.coeffs)):
                raise StepFailure("local expansion overflowed", tc_i.t, dt)
            return tc, 0, 0.0

        evaluate = self._matching(tc_i, dt)
        seed = evaluate(predictor)
        if not seed[2] <= _SEED_ACCEPT * (1.0 + float(np.max(np.abs(predictor)))):
            # stiff components spoil the Taylor predictor; a linearly implicit
            # theta-step stays closer to the right branch of the matching equation
            alt = evaluate(self._linear_seed(tc_i, dt))
            if not seed[2] <= alt[2]:
                seed = alt
        try:
            return self._newton(evaluate, seed, dt, cfg.newton_max_iter, _MAX_DAMPED)
        except StepFailure as exc:
            logger.debug("direct solve at t=%.6g failed (%s); continuing in dt", tc_i.t, exc)
        return self._continuation(tc_i, dt)

    def _matching(self, tc_i: TaylorCoeffs, dt: float):
        """Residual map ``beta -> (tc, r, ||r||)`` of the matching equation for step ``dt``."""
        K, theta = self.cfg.K, self.cfg.theta
        t_next = tc_i.t + dt
        target = tc_i.evaluate((1.0 - theta) * dt, K)
        weights = _powers(-theta * dt, K)

        def evaluate(beta):
            tc = self.coefficients(beta, t_next)
            with np.errstate(over="ignore", invalid="ignore"):
                r = np.tensordot(weights, tc.coeffs[:K + 1], axes=1) - target
            return tc, r, float(np.max(np.abs(r)))

        return evaluate

    def _continuation(self, tc_i: TaylorCoeffs, dt: float) -> tuple:
        """Follow the root from ``beta_i`` (step 0) out to step ``dt`` in growing fractions.

        Each stage is seeded by secant extrapolation of the last two roots;
        a failed stage is retried at half the length.
        """
        cfg = self.cfg
        beta_i = tc_i.coeffs[0]
        path = [(0.0, beta_i)]
        frac, h = 0.0, 0.5
        total = 0
        while frac < 1.0:
            new = min(1.0, frac + h)
            (s0, b0), (s1, b1) = (path[-2], path[-1]) if len(path) > 1 else (path[0], path[0])
            guess = b1 + (new - s1) / (s1 - s0) * (b1 - b0) if s1 > s0 else b1
            evaluate = self._matching(tc_i, new * dt)
            try:
                tc, iters, rnorm = self._newton(evaluate, evaluate(guess), new * dt,
                                                cfg.newton_max_iter, cfg.newton_max_iter)
            except StepFailure:
                h *= 0.5
                if h < _MIN_STAGE:
                    raise StepFailure("continuation in the step size stalled", tc_i.t, dt)
                continue
            total += iters
            frac = new
            path.append((frac, tc.coeffs[0]))
            h = min(2.0 * h, 1.0)
        return tc, total, rnorm

    def _newton(self, evaluate, seed: tuple, dt: float, max_iter: int, max_damped: int) -> tuple:
        """Modified Newton iteration on the matching residual from ``seed = (tc, r, ||r||)``."""
        tc, r, rnorm = seed
        if not np.isfinite(rnorm):
            raise StepFailure("matching residual is not finite (local expansion diverged)",
                              tc.t - dt, dt)
        beta = tc.coeffs[0]
        n = self.system.size
        shape = self.system.interior_shape
        tol_scale = self.cfg.newton_tol
        fresh = False
        if self._lu is None or self._lu_dt != dt:
            self._factorize(tc, dt)
            fresh = True

        def correction(res):
            d = lu_solve(self._lu, res.reshape(n)).reshape(shape)
            return d, float(np.max(np.abs(d)))

        direction, dnorm = correction(r)
        damped = 0
        for it in range(max_iter + 1):
            tol = tol_scale * (1.0 + float(np.max(np.abs(beta))))
            if rnorm <= tol:
                return tc, it, rnorm
            if it == max_iter:
                break
            lam = 1.0
            while True:
                trial = beta - lam * direction
                t_tc, t_r, t_norm = evaluate(trial)
                if np.isfinite(t_norm):
                    # natural monotonicity: the simplified correction must shrink
                    t_dir, t_dnorm = correction(t_r)
                    if t_dnorm <= (1.0 - 0.25 * lam) * dnorm:
                        break
                if not fresh:
                    # stale matrix: rebuild at the current iterate before shortening the step
                    self._factorize(tc, dt)
                    fresh = True
                    direction, dnorm = correction(r)
                    lam = 1.0
                    continue
                if lam == 1.0 and dnorm <= tol:
                    # residual is at its rounding floor and the exact correction is negligible
                    return tc, it, rnorm
                lam *= 0.5
                if lam < _MIN_DAMPING:
                    raise StepFailure(f"Newton line search failed (residual {rnorm:.3e})",
                                      tc.t - dt, dt)
            if lam < 1.0:
                damped += 1
                if damped > max_damped:
                    raise StepFailure(f"Newton needed damping {damped} times "
                                      f"(residual {t_norm:.3e})", tc.t - dt, dt)
            contraction = t_dnorm / dnorm if dnorm > 0 else 0.0
            stagnant = t_norm > 0.5 * rnorm
            beta, tc, r, rnorm = trial, t_tc, t_r, t_norm
            direction, dnorm = t_dir, t_dnorm
            if lam == 1.0 and contraction <= 0.5 and dnorm <= tol and stagnant:
                # the next correction is below tolerance and the residual no longer
                # decreases: it sits at its rounding floor
                return tc, it + 1, rnorm
            fresh = False
            if contraction > _REFRESH_CONTRACTION:
                self._factorize(tc, dt)
                fresh = True
                direction, dnorm = correction(r)
        raise StepFailure(f"Newton iteration did not converge in {max_iter} "
                          f"iterations (residual {rnorm:.3e})", tc.t - dt, dt)


def solve_step(system: SemiDiscreteSystem, beta_i: np.ndarray, t_i: float, dt: float,
               cfg: IntegratorConfig) -> tuple:
    """Advance ``beta_i`` from ``t_i`` by ``dt``; returns ``(beta_next, StepRecord)``."""
    stepper = Stepper(system, cfg)
    tc_i = stepper.coefficients(beta_i, t_i)
    tc_next, iters, res = stepper.step(tc_i, dt)
    est = _error_estimate(tc_next, cfg, dt) if cfg.mode == "adaptive" else math.nan
    return tc_next.coeffs[0].copy(), StepRecord(t=t_i + dt, dt_used=dt, newton_iters=iters,
                                                error_estimate=est, accepted=True, residual=res)


def integrate_fixed(system: SemiDiscreteSystem, beta0: np.ndarray, t_f: float,
                    cfg: IntegratorConfig, t0: float = 0.0) -> RunReport:
    """Fixed-step integration from ``t0`` to ``t_f``; the last step is shortened to land on ``t_f``."""
    if cfg.mode != "fixed":
        raise ValueError("integrate_fixed needs a config with dt set")
    beta0 = system.check_shape(beta0)
    if t_f < t0:
        raise ValueError("t_f must not precede t0")
    report = RunReport(final_field=beta0.copy(), final_time=t0)
    if t_f == t0:
        return report
    stepper = Stepper(system, cfg)
    n_steps = max(1, math.ceil((t_f - t0) / cfg.dt * (1 - 1e-12)))
    tc = stepper.coefficients(beta0, t0)
    for i in range(n_steps):
        t = t0 + i * cfg.dt
        dt = cfg.dt if i < n_steps - 1 else t_f - t
        tc, iters, res = stepper.step(tc, dt)
        tc.t = t0 + (i + 1) * cfg.dt if i < n_steps - 1 else t_f
        report.steps.append(StepRecord(t=tc.t, dt_used=dt, newton_iters=iters,
                                       error_estimate=math.nan, accepted=True, residual=res))
    report.final_field = tc.coeffs[0].copy()
    report.final_time = t_f
    return report


def integrate_adaptive(system: SemiDiscreteSystem, beta0: np.ndarray, t_f: float,
                       cfg: IntegratorConfig, t0: float = 0.0) -> RunReport:
    """Adaptive integration with the step bound of :func:`step_bound`.

    A step is proposed at ``safety`` times the bound evaluated at the current
    expansion point (growth limited to a factor 2 and clamped to
    ``[dt_min, dt_max]``), solved, and re-checked against the bound evaluated
    from the coefficients at the new point. Failed checks and Newton failures
    halve the step.
    """
    if cfg.mode != "adaptive":
        raise ValueError("integrate_adaptive needs a config with tol set")
    beta0 = system.check_shape(beta0)
    report = RunReport(final_field=beta0.copy(), final_time=t0)
    if t_f <= t0:
        return report
    stepper = Stepper(system, cfg)
    tc = stepper.coefficients(beta0, t0)
    t = t0
    dt_prop = min(cfg.dt_max, max(cfg.dt_min, cfg.safety * step_bound(tc, cfg)))
    rejects = 0
    while t < t_f and not math.isclose(t, t_f, rel_tol=1e-14, abs_tol=1e-15):
        dt = min(dt_prop, t_f - t)
        try:
            tc_next, iters, res = stepper.step(tc, dt)
        except StepFailure as exc:
            logger.debug("step at t=%.6g with dt=%.3e failed: %s", t, dt, exc)
            tc_next = None
            est = math.nan
            iters, res = cfg.newton_max_iter, math.nan
        if tc_next is not None:
            est = _error_estimate(tc_next, cfg, dt)
        if tc_next is None or est >= cfg.tol:
            report.steps.append(StepRecord(t=t + dt, dt_used=dt, newton_iters=iters,
                                           error_estimate=est, accepted=False, residual=res))
            rejects += 1
            dt_prop = dt / 2
            if dt_prop < cfg.dt_min or rejects > cfg.max_rejects:
                raise StepFailure(f"step size fell below dt_min at t={t:.6g}", t, dt)
            continue
        rejects = 0
        t = t_f if dt == t_f - t else t + dt
        tc_next.t = t
        tc = tc_next
        report.steps.append(StepRecord(t=t, dt_used=dt, newton_iters=iters,
                                       error_estimate=est, accepted=True, residual=res))
        dt_prop = min(2.0 * dt, cfg.safety * step_bound(tc, cfg), cfg.dt_max)
        dt_prop = max(dt_prop, cfg.dt_min)
    report.final_field = tc.coeffs[0].copy()
    report.final_time = t
    return report


def order_estimate(errors, dts) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dt)``."""
    errors = np.asarray(errors, dtype=float)
    dts = np.asarray(dts, dtype=float)
    if errors.shape != dts.shape or errors.size < 3:
        raise ValueError("need at least three (dt, error) pairs")
    if np.any(errors <= 0) or np.any(dts <= 0):
        raise ValueError("errors and step sizes must be positive")
    if np.any(np.diff(dts) >= 0):
        raise ValueError("step sizes must be strictly decreasing")
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(slope)
