"""Computable parameter conditions, contraction bounds, and error estimates.

Everything here is a pure function of its inputs.  The bounds mirror the
quantities the steppers are known to satisfy: a per-iteration contraction
factor for pairwise particle distances, a summable perturbation series that
controls the drift of the value level, softmin (log-sum-exp) estimates of the
attained minimum, and an iteration budget for the mean squared distance to a
known minimizer under a local growth condition.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .objective import ConfigurationError, gradient_bounds
from .swarm import StepSchedule, softmin_weights

__all__ = [
    "BoundSeries",
    "ComplexityConstants",
    "ConsensusCondition",
    "EmptyIndicatorError",
    "ErrorBoundCheck",
    "GrowthConditionParams",
    "InvalidParametersError",
    "ParameterConditionWarning",
    "ProximityResult",
    "check_consensus_condition",
    "check_error_bound_condition",
    "consensus_bound",
    "consensus_bound_series",
    "consensus_distance_bound",
    "contraction_constants",
    "error_budget",
    "growth_margin",
    "growth_radius",
    "iteration_budget",
    "laplace_value",
    "max_on_ball",
    "perturbation_series",
]


class ParameterConditionWarning(UserWarning):
    """The contraction condition on (lam, delta) is not satisfied."""


class InvalidParametersError(ValueError):
    """Parameters violate a precondition of the requested bound."""


class EmptyIndicatorError(ValueError):
    """No particle lies inside the requested ball around the minimizer."""


@dataclass(frozen=True)
class ConsensusCondition:
    """(1-lam)^2 + delta^2 and whether it is below 1/2, plus step summability.

    ``schedule_summable`` is True/False when decidable from the schedule kind
    and None otherwise.
    """

    value: float
    satisfied: bool
    schedule_summable: Optional[bool]


def check_consensus_condition(lam: float, delta: float,
                              schedule: StepSchedule) -> ConsensusCondition:
    """Evaluate the exponential-consensus parameter condition.

    Violations raise a warning rather than an error: in practice consensus
    often still emerges when (1-lam)^2 + delta^2 >= 1/2.
    """
    value = (1.0 - lam) ** 2 + delta ** 2
    satisfied = bool(value < 0.5)
    if not satisfied:
        warnings.warn(
            f"(1-lam)^2 + delta^2 = {value:.6g} >= 0.5: exponential consensus "
            "is not guaranteed for these parameters, though empirically the "
            "swarm often still reaches consensus.",
            ParameterConditionWarning, stacklevel=2)
    return ConsensusCondition(value=float(value), satisfied=satisfied,
                              schedule_summable=schedule.summable)


def _contraction_factor(lam: float, delta: float, alpha: float,
                        L_g: float) -> float:
    return 2.0 * ((1.0 - lam) ** 2 + delta ** 2 + alpha ** 2 * L_g ** 2)


@dataclass(frozen=True)
class BoundSeries:
    """Per-iteration contraction factors and their running products."""

    factors: np.ndarray
    products: np.ndarray  # products[k] bounds the decay after k iterations

    @classmethod
    def build(cls, k_max: int, lam: float, delta: float,
              schedule: StepSchedule, L_g: float) -> "BoundSeries":
        factors = np.array([
            _contraction_factor(lam, delta, schedule.alpha(n), L_g)
            for n in range(k_max)])
        products = np.concatenate(([1.0], np.cumprod(factors)))
        return cls(factors=factors, products=products)


def consensus_bound(k: int, lam: float, delta: float, schedule: StepSchedule,
                    L_g: float, var_init: float) -> float:
    """Bound on the expected squared particle-to-consensus distance at step k.

    Returns 2 * prod_{n<k} factor_n * var_init; the empty product at k = 0
    gives 2 * var_init.
    """
    if var_init < 0:
        raise InvalidParametersError("var_init must be >= 0")
    p = 1.0
    for n in range(k):
        p *= _contraction_factor(lam, delta, schedule.alpha(n), L_g)
    return 2.0 * p * var_init


def consensus_bound_series(k_max: int, lam: float, delta: float,
                           schedule: StepSchedule, L_g: float,
                           var_init: float) -> np.ndarray:
    """consensus_bound evaluated at every k in 0..k_max (inclusive)."""
    if var_init < 0:
        raise InvalidParametersError("var_init must be >= 0")
    return 2.0 * var_init * BoundSeries.build(
        k_max, lam, delta, schedule, L_g).products


def perturbation_series(lam: float, delta: float, schedule: StepSchedule,
                        L_g: float, M_g: float, var_init: float,
                        rtol: float = 1e-15, max_terms: int = 200_000) -> float:
    """Limit of sum_n [(lam+delta) sqrt(2 P_n var_init) + alpha_n M_g].

    P_n is the running product of contraction factors.  The series is summed
    until three consecutive terms fall below rtol times the partial sum; past
    that point both ingredients decay geometrically (sqrt(P_n) once the
    factors drop below one, alpha_n by schedule summability), so the
    discarded tail is below the same relative tolerance.  Finite only when
    the contraction condition holds and the schedule is summable.
    """
    cc = (1.0 - lam) ** 2 + delta ** 2
    if not (cc < 0.5 and schedule.summable is True):
        raise InvalidParametersError(
            "perturbation series diverges: needs (1-lam)^2 + delta^2 < 1/2 "
            "and a summable step schedule")
    total = 0.0
    prod = 1.0
    small = 0
    for n in range(max_terms):
        term = (lam + delta) * math.sqrt(2.0 * prod * var_init) \
            + schedule.alpha(n) * M_g
        total += term
        if term <= rtol * total:
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
        prod *= _contraction_factor(lam, delta, schedule.alpha(n), L_g)
    raise ArithmeticError("perturbation series did not converge "
                          f"within {max_terms} terms")


@dataclass(frozen=True)
class ComplexityConstants:
    """Contraction rate and perturbation budget for the mean squared error.

    ``gamma`` is the per-iteration contraction factor of the expected mean
    squared distance to the minimizer and ``kappa`` scales the largest
    tolerable perturbation; both are valid only when 2*lam - 2*lam^2 -
    2*delta^2 > 0.
    """

    xi: float
    gamma: float
    kappa: float
    K_eps: Optional[int] = None


def contraction_constants(lam: float, delta: float,
                          xi: float = 0.5) -> ComplexityConstants:
    """Contraction factor gamma and perturbation coefficient kappa.

    gamma = 1 - (1 - xi) * (2 lam - 2 lam^2 - 2 delta^2); kappa is the
    smaller of a linear and a square-root perturbation budget.  xi in (0, 1)
    splits the contraction between the two; 0.5 is a reasonable default.
    """
    if not 0 < xi < 1:
        raise InvalidParametersError(f"xi must lie in (0, 1), got {xi}")
    core = 2.0 * lam - 2.0 * lam ** 2 - 2.0 * delta ** 2
    if core <= 0:
        raise InvalidParametersError(
            "contraction requires 2*lam - 2*lam^2 - 2*delta^2 > 0; "
            f"got {core:.6g} for lam={lam}, delta={delta}")
    gamma = 1.0 - (1.0 - xi) * core
    if not 0 < gamma < 1:
        raise InvalidParametersError(f"gamma = {gamma:.6g} outside (0, 1)")
    a = lam ** 2 + delta ** 2
    kappa = min(
        xi * core / (4.0 * (2.0 * a + math.sqrt(a) + 1.0)),
        math.sqrt(xi * core / (2.0 * (2.0 * a + 2.0))))
    return ComplexityConstants(xi=float(xi), gamma=float(gamma),
                               kappa=float(kappa))


def iteration_budget(W0: float, eps: float, gamma: float) -> int:
    """Smallest k with gamma^k * W0 <= eps; zero when the target is already met."""
    if not W0 > 0:
        raise InvalidParametersError("W0 must be > 0")
    if not eps > 0:
        raise InvalidParametersError("eps must be > 0")
    if not 0 < gamma < 1:
        raise InvalidParametersError("gamma must lie in (0, 1)")
    if eps >= W0:
        return 0
    k = max(1, math.ceil(math.log(W0 / eps) / math.log(1.0 / gamma)))
    while k > 1 and gamma ** (k - 1) * W0 <= eps:
        k -= 1
    while gamma ** k * W0 > eps:
        k += 1
    return k


@dataclass(frozen=True)
class GrowthConditionParams:
    """Local growth profile of the objective around its unique minimizer.

    mu * ||x - x*|| <= (f(x) - f*)^nu inside the R0-ball, and f - f* exceeds
    f_inf outside it.
    """

    f_inf: float
    R0: float
    nu: float
    mu: float

    def __post_init__(self):
        if min(self.f_inf, self.R0, self.nu, self.mu) <= 0:
            raise InvalidParametersError(
                "f_inf, R0, nu, mu must all be positive")


def growth_margin(gcp: GrowthConditionParams, c4k: float) -> float:
    """Value margin q = min(f_inf, (mu * c4k / sqrt(2))^(1/nu)) / 2."""
    if not c4k > 0:
        raise InvalidParametersError("c4k must be > 0")
    return 0.5 * min(gcp.f_inf,
                     (gcp.mu * c4k / math.sqrt(2.0)) ** (1.0 / gcp.nu))


class ProximityResult(NamedTuple):
    bound: float
    holds: bool
    deviation: float


def consensus_distance_bound(positions, fvals, xstar, fstar: float,
                             gcp: GrowthConditionParams, r: float, q: float,
                             beta: float, f_r: float) -> ProximityResult:
    """Bound the softmin-average's distance to the minimizer and verify it.

    Requires r in (0, R0], q > 0 with q + f_r - fstar <= f_inf, and at least
    one particle within distance r of the minimizer.  ``f_r`` is the maximum
    of f over the r-ball (supply it from a grid search).  The deviation is
    recomputed from ``fvals`` at the given beta with shift-normalized weights.
    """
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    xs = np.broadcast_to(np.asarray(xstar, dtype=float), (pts.shape[1],))
    if not 0 < r <= gcp.R0:
        raise InvalidParametersError(f"r must lie in (0, {gcp.R0}], got {r}")
    if not q > 0:
        raise InvalidParametersError("q must be > 0")
    if q + f_r - fstar > gcp.f_inf:
        raise InvalidParametersError(
            f"hypothesis q + f_r - f* <= f_inf violated: "
            f"{q + f_r - fstar:.6g} > {gcp.f_inf:.6g}")
    dists = np.linalg.norm(pts - xs, axis=1)
    inside = int(np.count_nonzero(dists <= r))
    if inside == 0:
        raise EmptyIndicatorError(
            f"no particle within distance {r} of the minimizer")
    bound = (q + f_r - fstar) ** gcp.nu / gcp.mu \
        + math.exp(-beta * q) / inside * float(dists.sum())
    w = softmin_weights(fvals, beta)
    deviation = float(np.linalg.norm(w @ pts - xs))
    return ProximityResult(bound=float(bound), holds=bool(deviation <= bound),
                           deviation=deviation)


def laplace_value(beta: float, f_samples) -> float:
    """Softmin statistic -(1/beta) log mean(exp(-beta f_i)).

    Computed with the common shift min_i f_i, so it stays finite for beta up
    to 1e20.  Always lies between min f_i and mean f_i, and tends to min f_i
    as beta grows.
    """
    if not beta > 0:
        raise InvalidParametersError("beta must be > 0")
    f = np.asarray(f_samples, dtype=float)
    if f.size == 0:
        raise InvalidParametersError("need at least one sample")
    if not np.all(np.isfinite(f)):
        raise InvalidParametersError("samples must be finite")
    m = float(f.min())
    return m - math.log(float(np.mean(np.exp(-beta * (f - m))))) / beta


def error_budget(beta: float, epsilon: float, f_samples,
                 fstar: float) -> float:
    """Optimality-gap budget E(beta) = laplace_value - fstar - log(eps)/beta."""
    if not 0 < epsilon <= 1:
        raise InvalidParametersError("epsilon must lie in (0, 1]")
    return laplace_value(beta, f_samples) - fstar - math.log(epsilon) / beta


@dataclass(frozen=True)
class ErrorBoundCheck:
    """Outcome of the value-level condition behind the error budget.

    ``satisfied`` is None when the regime cannot be decided in floating
    point (the Monte-Carlo mean of exp(-beta f) degenerates to the minimal
    samples alone).  Both sides are reported on the log scale.
    """

    satisfied: Optional[bool]
    lhs_log: float
    rhs_log: float
    c3: float
    note: str = ""


def check_error_bound_condition(beta: float, lam: float, delta: float,
                                schedule: StepSchedule, L_f: float,
                                var_init: float, epsilon: float,
                                f_samples, fstar: float, d: int,
                                sigma: float) -> ErrorBoundCheck:
    """Compare (1-eps) E[exp(-beta f)] against beta L_f C3 exp(-beta f*).

    The left side uses the shifted Monte-Carlo mean of the supplied samples;
    the right side uses the perturbation-series constant C3 with estimator
    bounds derived from L_f.  Comparison happens on the log scale so large
    beta does not overflow.
    """
    if not 0 < epsilon < 1:
        raise InvalidParametersError("epsilon must lie in (0, 1)")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ParameterConditionWarning)
        cond = check_consensus_condition(lam, delta, schedule)
    if not cond.satisfied or cond.schedule_summable is not True:
        return ErrorBoundCheck(
            satisfied=False, lhs_log=math.nan, rhs_log=math.inf, c3=math.inf,
            note="perturbation series diverges for these parameters")
    lb = gradient_bounds(L_f, d, sigma)
    c3 = perturbation_series(lam, delta, schedule, lb.L_g, lb.M_g, var_init)
    lap = laplace_value(beta, f_samples)
    lhs_log = math.log1p(-epsilon) - beta * lap
    rhs_log = -math.inf if c3 == 0 else math.log(beta * L_f * c3) - beta * fstar
    f = np.asarray(f_samples, dtype=float)
    gaps = f - f.min()
    positive = gaps[gaps > 0]
    if positive.size and beta * float(positive.min()) > 700.0:
        return ErrorBoundCheck(
            satisfied=None, lhs_log=lhs_log, rhs_log=rhs_log, c3=c3,
            note="condition unverifiable in floating point: exp(-beta f) "
                 "underflows for every non-minimal sample at this beta")
    return ErrorBoundCheck(satisfied=bool(lhs_log >= rhs_log),
                           lhs_log=lhs_log, rhs_log=rhs_log, c3=c3)


def max_on_ball(fn, center, radius: float, resolution: float = 1e-3) -> float:
    """Grid-search maximum of fn over the closed ball (dimension 1 or 2 only).

    ``fn`` must accept a (B, d) array and return (B,) values; ``resolution``
    is the grid spacing.
    """
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if not radius > 0:
        raise ConfigurationError("radius must be > 0")
    if not 0 < resolution <= radius:
        raise ConfigurationError("need 0 < resolution <= radius")
    d = c.shape[0]
    if d == 1:
        xs = np.arange(c[0] - radius, c[0] + radius + resolution / 2,
                       resolution)
        xs = np.append(xs, c[0] + radius)
        return float(np.max(fn(xs[:, None])))
    if d == 2:
        g = np.arange(-radius, radius + resolution / 2, resolution)
        xx, yy = np.meshgrid(g, g)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        pts = pts[np.einsum("ij,ij->i", pts, pts) <= radius ** 2] + c
        return float(np.max(fn(pts)))
    raise ConfigurationError("grid search supports dimension 1 or 2 only")


def growth_radius(fn, center, fstar: float, q: float, R0: float,
                  resolution: float = 1e-3) -> float:
    """Largest radius s <= R0 whose ball maximum stays within fstar + q.

    Grid approximation for dimension 1 or 2: evaluates fn on a dense grid of
    the R0-ball, takes the running maximum outward, and returns the largest
    grid radius where it still satisfies max f - fstar <= q (0.0 if none).
    """
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if not (q > 0 and R0 > 0):
        raise ConfigurationError("need q > 0 and R0 > 0")
    d = c.shape[0]
    if d == 1:
        off = np.arange(-R0, R0 + resolution / 2, resolution)
        pts = (c[0] + off)[:, None]
    elif d == 2:
        g = np.arange(-R0, R0 + resolution / 2, resolution)
        xx, yy = np.meshgrid(g, g)
        off2 = np.column_stack([xx.ravel(), yy.ravel()])
        off2 = off2[np.einsum("ij,ij->i", off2, off2) <= R0 ** 2]
        pts = off2 + c
        off = off2
    else:
        raise ConfigurationError("grid search supports dimension 1 or 2 only")
    radii = np.linalg.norm(np.atleast_2d(off if d == 2 else off[:, None]),
                           axis=1)
    vals = np.asarray(fn(pts), dtype=float)
    order = np.argsort(radii)
    running = np.maximum.accumulate(vals[order])
    ok = running - fstar <= q
    if not ok[0]:
        return 0.0
    last = np.flatnonzero(ok)[-1] if ok.all() else np.flatnonzero(~ok)[0] - 1
    return float(min(radii[order][last], R0))
