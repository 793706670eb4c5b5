"""Gaussian observation model, priors, and cached posterior evaluation.

Measured block-averaged powers are modelled as the surrogate prediction
plus i.i.d. Gaussian noise with unknown variance lambda2:

    z_t = y_t(theta) + eps_t,   eps_t ~ N(0, lambda2)

The three physical factors carry independent uniform box priors and the
noise variance carries the scale-invariant 1/lambda2 prior, so the
unnormalized log posterior is

    -(T/2) log(2 pi lambda2) - SS(theta)/(2 lambda2)
    - log|box| - log lambda2

inside the support and -inf outside.  `PosteriorModel` binds data, forcing
and geometry together and memoizes the forward model by parameter vector;
a calibration chain revisits accepted states constantly, and downstream
validation reuses the same cache instead of re-simulating.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .thermal import (
    DEFAULT_THETA_LOWER,
    DEFAULT_THETA_UPPER,
    CellGeometry,
    ForcingMatrix,
    _as_theta_array,
    _CompiledForcing,
    block_average,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class MeasurementSeries:
    """Observed block-averaged heating powers (W)."""

    values: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise DomainError(f"measurements must be a non-empty 1-d series, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            k = int(np.flatnonzero(~np.isfinite(self.values))[0])
            raise DomainError(f"measurement value at index {k} is not finite")
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=float)
            if self.timestamps.shape != self.values.shape:
                raise DomainError("measurement timestamps and values differ in length")

    def __len__(self) -> int:
        return int(self.values.size)

    def __array__(self, dtype=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass
class NuisanceParams:
    """Observation-noise variance (W^2)."""

    lambda2: float

    def __post_init__(self):
        if not np.isfinite(self.lambda2) or self.lambda2 <= 0.0:
            raise DomainError(f"lambda2 must be finite and > 0, got {self.lambda2}")


def _lambda2_value(lambda2) -> float:
    if isinstance(lambda2, NuisanceParams):
        return lambda2.lambda2
    return float(lambda2)


@dataclass
class PriorSpec:
    """Uniform box on theta plus the 1/lambda2 variance prior."""

    theta_lower: np.ndarray = field(default_factory=lambda: DEFAULT_THETA_LOWER.copy())
    theta_upper: np.ndarray = field(default_factory=lambda: DEFAULT_THETA_UPPER.copy())
    variance_prior: str = "jeffreys"

    def __post_init__(self):
        self.theta_lower = np.asarray(self.theta_lower, dtype=float)
        self.theta_upper = np.asarray(self.theta_upper, dtype=float)
        if self.theta_lower.shape != (3,) or self.theta_upper.shape != (3,):
            raise DomainError("prior bounds must each have 3 components")
        if not (np.all(np.isfinite(self.theta_lower)) and np.all(np.isfinite(self.theta_upper))):
            raise DomainError("prior bounds must be finite")
        if np.any(self.theta_lower >= self.theta_upper):
            raise DomainError("each prior lower bound must lie strictly below its upper bound")
        if self.variance_prior != "jeffreys":
            raise DomainError(f"unsupported variance prior: {self.variance_prior!r}")

    @property
    def log_box_measure(self) -> float:
        return float(np.sum(np.log(self.theta_upper - self.theta_lower)))

    def contains(self, theta) -> bool:
        th = _as_theta_array(theta)
        return bool(np.all(np.isfinite(th))
                    and np.all(th >= self.theta_lower)
                    and np.all(th <= self.theta_upper))

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.theta_lower + self.theta_upper)


def sum_squares(z, y) -> float:
    """Sum of squared residuals between measurements and predictions."""
    zv = np.asarray(z, dtype=float)
    yv = np.asarray(y, dtype=float)
    if zv.ndim != 1 or zv.size == 0:
        raise DomainError(f"z must be a non-empty 1-d series, got shape {zv.shape}")
    if zv.shape != yv.shape:
        raise DomainError(f"series length mismatch: z has {zv.shape}, y has {yv.shape}")
    r = zv - yv
    return float(np.dot(r, r))


def log_likelihood(z, y, lambda2) -> float:
    """Gaussian log likelihood of the residuals at noise variance lambda2."""
    lam2 = _lambda2_value(lambda2)
    if not np.isfinite(lam2) or lam2 <= 0.0:
        raise DomainError(f"lambda2 must be finite and > 0, got {lam2}")
    ss = sum_squares(z, y)
    t = np.asarray(z, dtype=float).size
    return -0.5 * t * (LOG_2PI + math.log(lam2)) - ss / (2.0 * lam2)


def log_prior(theta, lambda2, prior: PriorSpec | None = None) -> float:
    """Log prior density; -inf outside the support (no exception raised)."""
    prior = prior if prior is not None else PriorSpec()
    lam2 = _lambda2_value(lambda2) if not isinstance(lambda2, NuisanceParams) else lambda2.lambda2
    if not np.isfinite(lam2) or lam2 <= 0.0:
        return -math.inf
    if not prior.contains(theta):
        return -math.inf
    return -prior.log_box_measure - math.log(lam2)


def log_posterior_unnormalized(theta, lambda2, z, forcing: ForcingMatrix,
                               geom: CellGeometry, prior: PriorSpec | None = None,
                               block_count: int = 30, y0: float = 0.0) -> float:
    """One-shot unnormalized log posterior (no caching).

    Support violations short-circuit to -inf before any simulation runs.
    For repeated evaluation build a `PosteriorModel` instead.
    """
    lp = log_prior(theta, lambda2, prior)
    if lp == -math.inf:
        return -math.inf
    from .thermal import simulate  # local import keeps module load light
    pred = simulate(theta, y0, forcing, geom)
    y = block_average(pred.powers, block_count)
    return lp + log_likelihood(z, y, lambda2)


class PosteriorModel:
    """Data, forcing, geometry and prior bound into a cached posterior.

    The forward model is memoized by parameter vector.  The cache is
    guarded by a lock: concurrent evaluations of the same theta may
    duplicate the simulation but always return identical values.  Cached
    arrays are shared, so callers must treat returned predictions as
    read-only.
    """

    def __init__(self, z, forcing: ForcingMatrix, geom: CellGeometry,
                 prior: PriorSpec | None = None, block_count: int = 30,
                 y0: float = 0.0):
        self.z = np.asarray(z, dtype=float)
        if self.z.ndim != 1 or self.z.size == 0:
            raise DomainError(f"z must be a non-empty 1-d series, got shape {self.z.shape}")
        if int(block_count) != block_count or not 1 <= block_count <= forcing.n:
            raise DomainError(f"block_count must be an integer in [1, {forcing.n}], got {block_count}")
        if self.z.size != block_count:
            raise DomainError(f"z has {self.z.size} entries but block_count is {block_count}")
        self.forcing = forcing
        self.geom = geom
        self.prior = prior if prior is not None else PriorSpec()
        self.block_count = int(block_count)
        self.y0 = float(y0)
        self._compiled = _CompiledForcing(forcing, geom)
        self._cache: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()
        self._n_simulations = 0

    @property
    def n_obs(self) -> int:
        return int(self.z.size)

    @property
    def simulation_count(self) -> int:
        return self._n_simulations

    @property
    def cache_size(self) -> int:
        return len(self._cache)

    def in_support(self, theta) -> bool:
        return self.prior.contains(theta)

    def init_theta(self) -> np.ndarray:
        return self.prior.midpoint()

    def default_scales(self) -> np.ndarray:
        return 0.05 * (self.prior.theta_upper - self.prior.theta_lower)

    def prediction(self, theta) -> np.ndarray:
        """Block-averaged model prediction at theta, memoized."""
        th = _as_theta_array(theta)
        key = th.tobytes()
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        y = block_average(self._compiled.run(th, self.y0), self.block_count)
        with self._lock:
            self._cache[key] = y
            self._n_simulations += 1
        return y

    def sum_squares(self, theta) -> float:
        return sum_squares(self.z, self.prediction(theta))

    def residual_ss(self, prediction) -> float:
        return sum_squares(self.z, prediction)

    def evaluate(self, theta, lambda2) -> tuple[float, np.ndarray | None]:
        """(unnormalized log posterior, averaged prediction) at a state.

        Out-of-support states return (-inf, None) without touching the
        simulator.
        """
        lp = log_prior(theta, lambda2, self.prior)
        if lp == -math.inf:
            return -math.inf, None
        y = self.prediction(theta)
        return lp + log_likelihood(self.z, y, lambda2), y
