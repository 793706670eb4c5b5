"""Parameter screening and global sensitivity.

Three layers, cheapest first:

1. `oat_index` - local one-at-a-time central differences of the simulated
   power series around a nominal point, in W per parameter unit.
2. `hybrid_index` - collapses each time-resolved index to
   sqrt(mean^2 + std^2), so a parameter matters if its effect is large on
   average *or* strongly time-varying.
3. `sobol_first_order` - global first-order variance share of a scalar
   quantity of interest, estimated by pick-freeze Monte Carlo over the
   prior boxes.

Parameters are numbered 1..3 throughout this module, matching the
theta1/theta2/theta3 naming used in reports; `screen` returns those
1-based numbers.

Simulators are plain callables theta -> output; outputs may be scalars or
arrays (arrays give per-step indices at no extra simulator calls).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .rng import DOMAIN_SOBOL, substream
from .thermal import DEFAULT_THETA_LOWER, DEFAULT_THETA_UPPER, THETA_NAMES, _as_theta_array

N_PARAMS = 3


def _check_param(param: int) -> int:
    if not isinstance(param, (int, np.integer)) or not 1 <= param <= N_PARAMS:
        raise DomainError(f"parameter number must be an integer in 1..{N_PARAMS} "
                          f"(theta1..theta{N_PARAMS}), got {param!r}")
    return int(param)


@dataclass
class OATSpec:
    """Nominal point, relative step, and the screening threshold."""

    nominal: np.ndarray
    threshold: float
    fraction: float = 0.05
    theta_lower: np.ndarray = field(default_factory=lambda: DEFAULT_THETA_LOWER.copy())
    theta_upper: np.ndarray = field(default_factory=lambda: DEFAULT_THETA_UPPER.copy())

    def __post_init__(self):
        self.nominal = _as_theta_array(self.nominal)
        self.theta_lower = np.asarray(self.theta_lower, dtype=float)
        self.theta_upper = np.asarray(self.theta_upper, dtype=float)
        if self.theta_lower.shape != (N_PARAMS,) or self.theta_upper.shape != (N_PARAMS,):
            raise DomainError("theta bounds must each have 3 entries")
        if not np.all(self.theta_lower < self.theta_upper):
            raise DomainError("theta_lower must be strictly below theta_upper")
        if not 0.0 < self.fraction < 0.5:
            raise DomainError(f"perturbation fraction must lie in (0, 0.5), got {self.fraction}")
        if not np.isfinite(self.threshold) or self.threshold < 0.0:
            raise DomainError(f"screening threshold must be finite and >= 0, got {self.threshold}")
        if np.any(self.nominal < self.theta_lower) or np.any(self.nominal > self.theta_upper):
            raise DomainError("nominal point lies outside the prior box")

    def step(self, param: int) -> float:
        """Perturbation h for one parameter; box-width fallback at zero."""
        j = _check_param(param) - 1
        base = self.nominal[j]
        if base != 0.0:
            return self.fraction * abs(base)
        return self.fraction * (self.theta_upper[j] - self.theta_lower[j])


@dataclass
class SensitivityIndices:
    """Per-parameter OAT result: the raw series and its three summaries."""

    param: int                # 1-based, matches theta<param>
    series: np.ndarray        # W per parameter unit, one entry per time step
    s_mean: float
    s_std: float
    s_hybrid: float

    @classmethod
    def from_series(cls, param: int, series) -> "SensitivityIndices":
        mean, std, hybrid = hybrid_index(series)
        return cls(param=_check_param(param), series=np.asarray(series, dtype=float),
                   s_mean=mean, s_std=std, s_hybrid=hybrid)


@dataclass
class ScreeningResult:
    indices: list[SensitivityIndices]
    retained: list[int]       # 1-based parameter numbers, descending hybrid
    threshold: float


def oat_index(func, param: int, spec: OATSpec) -> np.ndarray:
    """Central-difference sensitivity of `func` to one parameter.

    Exactly two simulator calls; exact on outputs affine in the parameter.
    Raises DomainError when a perturbed point leaves the prior box.
    """
    j = _check_param(param) - 1
    h = spec.step(param)
    plus = spec.nominal.copy()
    minus = spec.nominal.copy()
    plus[j] += h
    minus[j] -= h
    for point, side in ((plus, "+h"), (minus, "-h")):
        if point[j] < spec.theta_lower[j] or point[j] > spec.theta_upper[j]:
            raise DomainError(
                f"perturbed point theta{param} {side} = {point[j]} leaves the prior box "
                f"[{spec.theta_lower[j]}, {spec.theta_upper[j]}]; try a smaller "
                f"perturbation fraction than {spec.fraction}")
    y_plus = np.asarray(func(plus), dtype=float)
    y_minus = np.asarray(func(minus), dtype=float)
    if y_plus.shape != y_minus.shape:
        raise DomainError(f"simulator output shape changed between perturbations: "
                          f"{y_plus.shape} vs {y_minus.shape}")
    return (y_plus - y_minus) / (2.0 * h)


def hybrid_index(series) -> tuple[float, float, float]:
    """Collapse a time-resolved index to (mean, std, sqrt(mean^2 + std^2)).

    The std uses the 1/T denominator, so for a constant series the hybrid
    equals |mean| exactly.
    """
    arr = np.asarray(series, dtype=float).ravel()
    if arr.size < 2:
        raise DomainError(f"need at least 2 time steps, got {arr.size}")
    mean = float(np.mean(arr))
    std = float(np.std(arr))
    return mean, std, float(np.hypot(mean, std))


def screen(hybrid_values, threshold: float) -> list[int]:
    """Parameter numbers whose hybrid index reaches the threshold.

    Returns 1-based numbers ordered by descending value, ties by number.
    """
    values = np.asarray(hybrid_values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise DomainError(f"need a non-empty 1-d value list, got shape {values.shape}")
    if not np.isfinite(threshold) or threshold < 0.0:
        raise DomainError(f"threshold must be finite and >= 0, got {threshold}")
    kept = [i + 1 for i in range(values.size) if values[i] >= threshold]
    return sorted(kept, key=lambda num: (-values[num - 1], num))


def oat_screening(func, spec: OATSpec) -> ScreeningResult:
    """OAT indices for every parameter plus the thresholded retention set."""
    indices = [SensitivityIndices.from_series(p, oat_index(func, p, spec))
               for p in range(1, N_PARAMS + 1)]
    retained = screen([idx.s_hybrid for idx in indices], spec.threshold)
    return ScreeningResult(indices=indices, retained=retained, threshold=spec.threshold)


def sobol_first_order(func, param: int, n_mc: int, *, theta_lower=None,
                      theta_upper=None, seed: int = 0):
    """First-order Sobol index of `func` w.r.t. one parameter, pick-freeze.

    Two independent uniform input matrices A and B are drawn on the prior
    box; the second has column `param` copied from the first, so the
    covariance of the two output vectors isolates that parameter's
    first-order variance share.  Estimates can dip slightly below zero by
    Monte Carlo noise; they are returned unclipped with a warning.

    Scalar outputs give a float; array outputs give per-component indices.
    """
    j = _check_param(param) - 1
    if n_mc < 1000:
        raise DomainError(f"n_mc must be >= 1000 for a usable estimate, got {n_mc}")
    lower = np.asarray(theta_lower if theta_lower is not None else DEFAULT_THETA_LOWER,
                       dtype=float)
    upper = np.asarray(theta_upper if theta_upper is not None else DEFAULT_THETA_UPPER,
                       dtype=float)
    if lower.shape != (N_PARAMS,) or upper.shape != (N_PARAMS,) or not np.all(lower < upper):
        raise DomainError("theta bounds must be 3-vectors with lower < upper")
    rng = substream(seed, DOMAIN_SOBOL, param)
    a = lower + (upper - lower) * rng.random((n_mc, N_PARAMS))
    b = lower + (upper - lower) * rng.random((n_mc, N_PARAMS))
    c = b.copy()
    c[:, j] = a[:, j]
    y_a = np.asarray([func(row) for row in a], dtype=float)
    y_c = np.asarray([func(row) for row in c], dtype=float)
    if y_a.shape != y_c.shape:
        raise DomainError(f"simulator output shape changed between matrices: "
                          f"{y_a.shape} vs {y_c.shape}")
    a_centered = y_a - y_a.mean(axis=0)
    c_centered = y_c - y_c.mean(axis=0)
    var = np.sum(a_centered * a_centered, axis=0) / (n_mc - 1)
    if np.any(var == 0.0):
        raise DomainError("output variance is zero; the Sobol index is undefined")
    cov = np.sum(a_centered * c_centered, axis=0) / (n_mc - 1)
    estimate = cov / var
    if np.any(estimate < 0.0):
        warnings.warn(f"first-order Sobol estimate for theta{param} is negative "
                      f"(Monte Carlo noise near zero); reported unclipped",
                      RuntimeWarning, stacklevel=2)
    return float(estimate) if estimate.ndim == 0 else estimate


def param_name(param: int) -> str:
    return THETA_NAMES[_check_param(param) - 1]
