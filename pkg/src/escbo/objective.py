"""Black-box objectives with evaluation accounting and forward-difference gradients."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ConfigurationError",
    "EstimationError",
    "FiniteDiffConfig",
    "LipschitzData",
    "Objective",
    "estimate_lipschitz",
    "forward_difference_gradient",
    "gradient_bounds",
    "minibatch_gradients",
]


class ConfigurationError(ValueError):
    """Invalid configuration: bad box, bad parameter, unknown name."""


class EstimationError(RuntimeError):
    """A gradient estimate hit a non-finite objective value.

    ``coordinate`` is the index of the offending probe direction, or None
    when the base point itself evaluated to a non-finite value.
    """

    def __init__(self, message: str, coordinate: Optional[int] = None,
                 particle: Optional[int] = None):
        super().__init__(message)
        self.coordinate = coordinate
        self.particle = particle


class Objective:
    """A function f: R^d -> R wrapped with a thread-safe evaluation counter.

    The counter increases by exactly one per evaluated point, including every
    probe point consumed by gradient estimation.  ``fn`` must be deterministic.
    When ``vectorized`` is true, ``fn`` must accept arrays of shape (..., d)
    and reduce over the last axis; otherwise it is called one point at a time.
    """

    def __init__(self, dim: int, fn: Callable, vectorized: bool = False,
                 name: str | None = None):
        if dim < 1:
            raise ConfigurationError(f"dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        self._fn = fn
        self._vectorized = bool(vectorized)
        self.name = name or getattr(fn, "__name__", "objective")
        self._count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self) -> int:
        return self._count

    def reset_count(self) -> None:
        with self._lock:
            self._count = 0

    def _charge(self, n: int) -> None:
        with self._lock:
            self._count += n

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self._charge(1)
        return float(self._fn(x))

    def eval_many(self, points) -> np.ndarray:
        """Evaluate a (B, d) batch of points; counts B evaluations."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ConfigurationError(
                f"expected a (B, {self.dim}) batch, got shape {pts.shape}")
        self._charge(pts.shape[0])
        if self._vectorized:
            return np.asarray(self._fn(pts), dtype=float)
        return np.array([float(self._fn(row)) for row in pts])

    def __repr__(self):
        return f"Objective({self.name!r}, dim={self.dim}, evals={self._count})"


@dataclass(frozen=True)
class FiniteDiffConfig:
    """Finite-difference interval for the forward-difference estimator."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class LipschitzData:
    """Gradient-estimator bounds derived from a Lipschitz constant.

    ``M_g`` bounds the estimator norm and ``L_g`` its Lipschitz constant.
    Instances are immutable; rebuild via :func:`gradient_bounds` whenever
    ``sigma`` or the dimension changes so the derived values stay consistent.
    """

    L_f: float
    dim: int
    sigma: float
    M_g: float
    L_g: float


def gradient_bounds(L_f: float, d: int, sigma: float) -> LipschitzData:
    """Bounds on the forward-difference estimator of an L_f-Lipschitz function."""
    if not (L_f > 0 and d >= 1 and sigma > 0):
        raise ConfigurationError(
            f"need L_f > 0, d >= 1, sigma > 0; got {L_f}, {d}, {sigma}")
    root_d = np.sqrt(float(d))
    return LipschitzData(L_f=float(L_f), dim=int(d), sigma=float(sigma),
                         M_g=float(root_d * L_f),
                         L_g=float(2.0 * root_d * L_f / sigma))


def forward_difference_gradient(obj: Objective, x, cfg: FiniteDiffConfig) -> np.ndarray:
    """Per-coordinate forward differences (f(x + sigma e_l) - f(x)) / sigma.

    Consumes exactly d + 1 evaluations: the base value f(x) is evaluated once
    and shared across all d coordinate probes.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.dim,):
        raise ConfigurationError(f"point shape {x.shape} != ({obj.dim},)")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("non-finite point")
    base = obj.eval(x)
    if not np.isfinite(base):
        raise EstimationError(
            f"objective returned {base} at the base point", coordinate=None)
    probes = x + cfg.sigma * np.eye(obj.dim)
    vals = obj.eval_many(probes)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise EstimationError(
            f"objective returned {vals[bad[0]]} at probe coordinate {bad[0]}",
            coordinate=int(bad[0]))
    return (vals - base) / cfg.sigma


def minibatch_gradients(obj: Objective, positions, batch,
                        cfg: FiniteDiffConfig) -> np.ndarray:
    """Forward-difference gradients for a subset of particles, zeros elsewhere.

    ``batch`` is a set of particle indices into ``positions``.  Consumes
    exactly |batch| * (d + 1) evaluations; particles outside the batch get a
    zero vector.
    """
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != obj.dim:
        raise ConfigurationError(
            f"positions must be (N, {obj.dim}), got {pts.shape}")
    n, d = pts.shape
    idx = np.unique(np.asarray(list(batch), dtype=int))
    grads = np.zeros_like(pts)
    if idx.size == 0:
        return grads
    if idx.min() < 0 or idx.max() >= n:
        raise ConfigurationError(
            f"batch indices must lie in [0, {n - 1}], got {idx.min()}..{idx.max()}")
    centers = pts[idx]
    base = obj.eval_many(centers)
    probes = centers[:, None, :] + cfg.sigma * np.eye(d)[None, :, :]
    vals = obj.eval_many(probes.reshape(idx.size * d, d)).reshape(idx.size, d)
    bad_base = np.flatnonzero(~np.isfinite(base))
    if bad_base.size:
        raise EstimationError(
            f"objective non-finite at particle {idx[bad_base[0]]}",
            coordinate=None, particle=int(idx[bad_base[0]]))
    bad = np.argwhere(~np.isfinite(vals))
    if bad.size:
        i, l = bad[0]
        raise EstimationError(
            f"objective non-finite at probe coordinate {l} of particle {idx[i]}",
            coordinate=int(l), particle=int(idx[i]))
    grads[idx] = (vals - base[:, None]) / cfg.sigma
    return grads


def estimate_lipschitz(obj: Objective, lo, hi, samples: int = 256,
                       seed: int = 0) -> float:
    """Estimate a Lipschitz constant by the largest pairwise difference quotient.

    Samples points uniformly in the box [lo, hi] and returns
    max |f(x) - f(y)| / ||x - y|| over all sampled pairs.  This is a lower
    estimate of the true constant; report it as an estimate, not a bound.
    """
    if samples < 2:
        raise ConfigurationError(f"need samples >= 2, got {samples}")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (obj.dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (obj.dim,))
    if np.any(lo >= hi):
        raise ConfigurationError("degenerate box: lo >= hi in some coordinate")
    gen = np.random.default_rng(seed)
    pts = gen.uniform(lo, hi, size=(samples, obj.dim))
    vals = obj.eval_many(pts)
    dv = np.abs(vals[:, None] - vals[None, :])
    dx = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    iu = np.triu_indices(samples, k=1)
    dv, dx = dv[iu], dx[iu]
    mask = dx > 0
    if not mask.any():
        return 0.0
    return float(np.max(dv[mask] / dx[mask]))
