"""Fixed-fee pricing under posterior uncertainty.

A customer pays a flat fee d (in the same W-equivalent units as the
period-mean power P_bar) regardless of actual consumption.  While the fee
undercuts true consumption the seller simply earns m*d; once d overshoots,
the customer may walk away, and the expected revenue is discounted by the
retention factor 1/(c*(d - P_bar) + 1):

    U(d, P_bar) = m*d                      if P_bar > d
                  m*d / (c*(d - P_bar)+1)  if P_bar <= d

m (price per W-equivalent) scales every utility equally, so it never
moves the argmax; the optimizer therefore searches the m-free curve and
multiplies m back in only for reporting.  c (defection pressure per W of
over-payment) trades revenue against retention: larger c pulls the
optimal fee down toward the posterior mass of P_bar.

The expected-utility curve is a Monte Carlo average over posterior QoI
draws.  It is piecewise-smooth with a kink at every draw and not concave
in general, so the optimizer scans a wide uniform grid first and only
then refines the best bracket by golden section.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

MIN_DRAWS = 100
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class UtilitySpec:
    """m: price per W-equivalent per period (> 0); c: defection rate (>= 0)."""

    m: float
    c: float

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m <= 0.0:
            raise DomainError(f"price m must be finite and > 0, got {self.m}")
        if not np.isfinite(self.c) or self.c < 0.0:
            raise DomainError(f"defection rate c must be finite and >= 0, got {self.c}")


@dataclass
class DecisionResult:
    d_hat: float
    utility_at_d_hat: float
    grid: np.ndarray              # fee values scanned
    expected_utility: np.ndarray  # U-bar on the grid (currency)
    se: np.ndarray                # Monte Carlo s.e. per grid point
    warnings: list[str] = field(default_factory=list)
    m: float = 1.0
    c: float = 0.0


def utility(d: float, p_bar: float, spec: UtilitySpec) -> float:
    """Revenue from one customer whose period-mean consumption is p_bar."""
    if not np.isfinite(d) or d <= 0.0:
        raise DomainError(f"fee d must be finite and > 0, got {d}")
    if p_bar > d:
        return spec.m * d
    denom = spec.c * (d - p_bar) + 1.0
    if denom <= 0.0:
        raise DomainError(f"retention denominator c*(d - p_bar) + 1 = {denom} is not "
                          f"positive; utility is undefined")
    return spec.m * d / denom


def defection_probability(d: float, p_bar: float, c: float) -> float:
    """Chance the customer walks: 1 - 1/(c*(d - p_bar) + 1), for d >= p_bar."""
    if c < 0.0:
        raise DomainError(f"defection rate c must be >= 0, got {c}")
    if d < p_bar:
        raise DomainError(f"defection requires over-payment: d = {d} is below "
                          f"p_bar = {p_bar}")
    return 1.0 - 1.0 / (c * (d - p_bar) + 1.0)


def _check_draws(draws) -> np.ndarray:
    arr = np.asarray(draws, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"QoI draws must be 1-d, got shape {arr.shape}")
    if arr.size < MIN_DRAWS:
        raise DomainError(f"need at least {MIN_DRAWS} QoI draws, got {arr.size}")
    if np.any(~np.isfinite(arr)):
        raise DomainError("QoI draws must all be finite")
    return arr


def _unit_utilities(d, draws: np.ndarray, c: float) -> np.ndarray:
    """Per-draw utility with m = 1; d may be scalar or a column vector."""
    d = np.asarray(d, dtype=float)
    under = draws > d
    return np.where(under, d, d / (c * (d - draws) + 1.0))


def expected_utility(d: float, draws, spec: UtilitySpec):
    """Monte Carlo mean utility at fee d; returns (mean, standard error)."""
    arr = _check_draws(draws)
    if not np.isfinite(d) or d <= 0.0:
        raise DomainError(f"fee d must be finite and > 0, got {d}")
    u = spec.m * _unit_utilities(d, arr, spec.c)
    return float(np.mean(u)), float(np.std(u, ddof=1) / np.sqrt(arr.size))


def optimize_fee(draws, spec: UtilitySpec, *, grid_points: int = 201,
                 tol: float = 0.01) -> DecisionResult:
    """Fee maximizing the Monte Carlo expected utility.

    Scans a uniform grid spanning [min draw - 2 s.d., max draw + 2 s.d.]
    (floored at tol so fees stay positive, and widened to at least +-tol
    when the draws are degenerate), then golden-section refines the
    bracket around the best grid point down to `tol` in d.  Ties break
    toward the smaller fee.  A maximum on the grid's upper endpoint means
    the curve is still rising there (always the case at c = 0, where
    utility is m*d); that is reported via the `unbounded_direction`
    warning flag rather than refined.
    """
    arr = _check_draws(draws)
    if grid_points < 3:
        raise DomainError(f"grid needs at least 3 points, got {grid_points}")
    if not np.isfinite(tol) or tol <= 0.0:
        raise DomainError(f"refinement tolerance must be finite and > 0, got {tol}")
    sd = float(np.std(arr, ddof=1))
    lo = float(arr.min() - 2.0 * sd)
    hi = float(arr.max() + 2.0 * sd)
    lo = max(lo, tol)
    if hi - lo < 2.0 * tol:  # degenerate draws; keep a searchable interval
        lo, hi = max(lo - tol, tol), hi + tol
    grid = np.linspace(lo, hi, grid_points)

    unit = _unit_utilities(grid[:, None], arr[None, :], spec.c)  # (G, M)
    means = unit.mean(axis=1)
    ses = unit.std(axis=1, ddof=1) / math.sqrt(arr.size)
    best = int(np.argmax(means))  # first max -> smaller d on ties

    flags: list[str] = []
    scalar = lambda d: float(np.mean(_unit_utilities(d, arr, spec.c)))
    if best == grid_points - 1:
        flags.append("unbounded_direction")
        d_hat, best_val = float(grid[best]), float(means[best])
    else:
        a = float(grid[best - 1]) if best > 0 else float(grid[0])
        b = float(grid[best + 1])
        d_hat, best_val = _golden_max(scalar, a, b, tol)
        if best_val < means[best]:  # refinement must never lose to the grid
            d_hat, best_val = float(grid[best]), float(means[best])

    return DecisionResult(
        d_hat=d_hat,
        utility_at_d_hat=spec.m * best_val,
        grid=grid,
        expected_utility=spec.m * means,
        se=spec.m * ses,
        warnings=flags,
        m=spec.m,
        c=spec.c,
    )


def _golden_max(f, a: float, b: float, tol: float):
    """Golden-section maximization on [a, b]; ties shrink toward a."""
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:  # keep the lower interval on ties
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
    d = 0.5 * (a + b)
    return d, f(d)
