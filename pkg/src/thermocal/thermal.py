"""Lumped RC surrogate of a setpoint-heated test cell.

The conditioned air is held at its setpoint by an ideal heating loop, so the
only dynamic state is the temperature of one capacitive wall node.  Over a
record of constant forcing the wall obeys

    C_w dT_w/dt = H_ext(wind) (t_ext - T_w) + H_wa (t_set - T_w) + a_w Q_sol

with

    H_ext = wall_conductance + wind_film_slope * wind
    H_wa  = theta3 * wall_air_conductance_base
    Q_sol = window_area * window_solar_factor
            * (i_beam + i_diff + theta1 * ground_view_factor * i_ghi)

and a fixed fraction a_w of the solar gain absorbed by the wall, the rest by
the air node.  The update over one step is the exact exponential solution of
that linear ODE, so it is unconditionally stable for any step size.

The heating power is the algebraic balance of the air node evaluated at the
new wall temperature, clamped at zero because the cell can only heat:

    P = H_wa (t_set - T_w) + (H_vent + theta2 H_tb) (t_set - t_ext)
        - (1 - a_w) Q_sol

Three dimensionless calibration factors scale the uncertain physics: theta1
(ground albedo), theta2 (thermal-bridge conductance multiplier) and theta3
(wall-air convective coupling multiplier).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import _kernels
from .errors import DataError, DomainError, SimulationError

# Fraction of the transmitted solar gain absorbed by the wall node; the
# remainder is released directly to the conditioned air.
WALL_SOLAR_FRACTION = 0.3

# Support of the calibration factors.  These double as the default prior box.
DEFAULT_THETA_LOWER = np.array([0.0, 0.0, 0.0])
DEFAULT_THETA_UPPER = np.array([1.0, 100.0, 100.0])

THETA_NAMES = ("theta1", "theta2", "theta3")


def _as_theta_array(theta) -> np.ndarray:
    """Coerce a ParameterVector or sequence to a float64 array of length 3."""
    if isinstance(theta, ParameterVector):
        return theta.as_array()
    arr = np.asarray(theta, dtype=float)
    if arr.shape != (3,):
        raise DomainError(f"theta must have exactly 3 components, got shape {arr.shape}")
    return arr


@dataclass
class ParameterVector:
    """Calibration factors (albedo, bridge multiplier, wall-air multiplier)."""

    theta1: float
    theta2: float
    theta3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ParameterVector":
        a = np.asarray(arr, dtype=float)
        if a.shape != (3,):
            raise DomainError(f"expected 3 components, got shape {a.shape}")
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def in_support(self, lower=DEFAULT_THETA_LOWER, upper=DEFAULT_THETA_UPPER) -> bool:
        a = self.as_array()
        return bool(np.all(np.isfinite(a)) and np.all(a >= lower) and np.all(a <= upper))

    def __array__(self, dtype=None):
        return self.as_array() if dtype is None else self.as_array().astype(dtype)


@dataclass
class CellGeometry:
    """Fixed constants of the cell envelope and its couplings.

    Conductances are lumped whole-surface values in W/K; the two `_base`
    entries are the quantities the dimensionless multipliers theta2 and
    theta3 act on.
    """

    wall_area: float            # m^2, envelope datum (not used by the update)
    window_area: float          # m^2
    wall_conductance: float     # W/K, wall node to ambient, still air
    wall_air_conductance_base: float  # W/K per unit of theta3
    bridge_conductance_base: float    # W/K per unit of theta2
    ventilation_conductance: float    # W/K
    wall_capacitance: float     # J/K
    window_solar_factor: float  # transmitted fraction, 0..1
    ground_view_factor: float   # view factor to ground-reflected flux, 0..1
    wind_film_slope: float      # W/K per (m/s) of wind

    def __post_init__(self):
        for name in ("wall_area", "window_area", "wall_conductance",
                     "wall_air_conductance_base", "bridge_conductance_base",
                     "ventilation_conductance", "wall_capacitance",
                     "wind_film_slope"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise DomainError(f"geometry field {name} must be finite and > 0, got {value}")
        for name in ("window_solar_factor", "ground_view_factor"):
            value = getattr(self, name)
            if not np.isfinite(value) or not 0.0 <= value <= 1.0:
                raise DomainError(f"geometry field {name} must lie in [0, 1], got {value}")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, mapping) -> "CellGeometry":
        names = cls.field_names()
        missing = [n for n in names if n not in mapping]
        if missing:
            raise DataError(f"geometry is missing required fields: {', '.join(missing)}")
        unknown = [k for k in mapping if k not in names]
        if unknown:
            raise DataError(f"geometry has unknown fields: {', '.join(unknown)}")
        try:
            values = {n: float(mapping[n]) for n in names}
        except (TypeError, ValueError) as exc:
            raise DataError(f"geometry has a non-numeric value: {exc}") from exc
        return cls(**values)

    def as_mapping(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ForcingRecord:
    """Boundary conditions over one simulation step."""

    timestamp: float  # s
    t_ext: float      # degC
    i_beam: float     # W/m^2 on the window plane
    i_diff: float     # W/m^2
    i_ghi: float      # W/m^2, global horizontal
    wind: float       # m/s
    t_set: float      # degC


_FORCING_COLUMNS = ("timestamps", "t_ext", "i_beam", "i_diff", "i_ghi", "wind", "t_set")


@dataclass
class ForcingMatrix:
    """Uniformly sampled forcing series for a whole run."""

    timestamps: np.ndarray
    t_ext: np.ndarray
    i_beam: np.ndarray
    i_diff: np.ndarray
    i_ghi: np.ndarray
    wind: np.ndarray
    t_set: np.ndarray
    dt: float | None = None  # derived from timestamps unless given (single record)

    def __post_init__(self):
        for name in _FORCING_COLUMNS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.timestamps.size
        if n < 1:
            raise DomainError("forcing needs at least 1 record")
        if n < 2 and self.dt is None:
            raise DomainError("single-record forcing needs an explicit dt")
        for name in _FORCING_COLUMNS:
            col = getattr(self, name)
            if col.shape != (n,):
                raise DomainError(f"forcing column {name} has shape {col.shape}, expected ({n},)")
            bad = np.flatnonzero(~np.isfinite(col))
            if bad.size:
                raise DomainError(f"forcing column {name} is not finite at row {bad[0]}")
        if n >= 2:
            steps = np.diff(self.timestamps)
            if np.any(steps <= 0):
                k = int(np.flatnonzero(steps <= 0)[0])
                raise DomainError(f"timestamps must be strictly increasing; violated between rows {k} and {k + 1}")
            dt = steps[0] if self.dt is None else float(self.dt)
            off = np.flatnonzero(np.abs(steps - dt) > 1e-9 * dt)
            if off.size:
                k = int(off[0])
                raise DomainError(
                    f"timestamps must be uniformly spaced; interval between rows {k} and {k + 1} "
                    f"is {steps[k]!r}, expected {dt!r}")
            self.dt = float(dt)
        else:
            self.dt = float(self.dt)
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise DomainError(f"dt must be finite and > 0, got {self.dt}")
        for name in ("i_beam", "i_diff", "i_ghi"):
            col = getattr(self, name)
            if np.any(col < 0):
                k = int(np.flatnonzero(col < 0)[0])
                raise DomainError(f"irradiance column {name} is negative at row {k}")
        if np.any(self.wind < 0):
            k = int(np.flatnonzero(self.wind < 0)[0])
            raise DomainError(f"wind must be non-negative; violated at row {k}")

    @property
    def n(self) -> int:
        return int(self.timestamps.size)

    def record(self, k: int) -> ForcingRecord:
        return ForcingRecord(
            timestamp=float(self.timestamps[k]),
            t_ext=float(self.t_ext[k]),
            i_beam=float(self.i_beam[k]),
            i_diff=float(self.i_diff[k]),
            i_ghi=float(self.i_ghi[k]),
            wind=float(self.wind[k]),
            t_set=float(self.t_set[k]),
        )


@dataclass
class PredictionSeries:
    """Simulated heating powers (W), one entry per forcing record."""

    powers: np.ndarray
    initial_power: float

    def __post_init__(self):
        self.powers = np.asarray(self.powers, dtype=float)

    def __len__(self) -> int:
        return int(self.powers.size)

    def __array__(self, dtype=None):
        return self.powers if dtype is None else self.powers.astype(dtype)


def _validate_record(record: ForcingRecord):
    for name in ("t_ext", "i_beam", "i_diff", "i_ghi", "wind", "t_set"):
        value = getattr(record, name)
        if not np.isfinite(value):
            raise DomainError(f"forcing field {name} is not finite: {value}")
    for name in ("i_beam", "i_diff", "i_ghi"):
        if getattr(record, name) < 0:
            raise DomainError(f"irradiance field {name} must be non-negative")
    if record.wind < 0:
        raise DomainError("forcing field wind must be non-negative")


def _record_gains(record: ForcingRecord, geom: CellGeometry) -> tuple[float, float, float]:
    """(h_ext, gain_fixed, gain_albedo) for one record; mirrors the array path."""
    h_ext = geom.wall_conductance + geom.wind_film_slope * record.wind
    gain_scale = geom.window_area * geom.window_solar_factor
    gain_fixed = gain_scale * (record.i_beam + record.i_diff)
    gain_albedo = gain_scale * geom.ground_view_factor * record.i_ghi
    return h_ext, gain_fixed, gain_albedo


def wall_equilibrium(record: ForcingRecord, theta, geom: CellGeometry) -> float:
    """Steady wall temperature the state relaxes to under frozen forcing."""
    _validate_record(record)
    th = _as_theta_array(theta)
    h_ext, gain_fixed, gain_albedo = _record_gains(record, geom)
    h_wa = th[2] * geom.wall_air_conductance_base
    q_solar = gain_fixed + th[0] * gain_albedo
    return (h_ext * record.t_ext + h_wa * record.t_set
            + WALL_SOLAR_FRACTION * q_solar) / (h_ext + h_wa)


def initial_wall_temperature(y0: float, record: ForcingRecord, theta,
                             geom: CellGeometry) -> float:
    """Invert the air-node balance at t = 0 for the starting wall temperature.

    A strictly positive initial power pins the wall temperature exactly.
    When `y0` is zero the clamp makes the balance non-invertible (any
    sufficiently warm wall yields zero power), so the wall starts at its
    steady temperature for the first record.  The same fallback applies
    when theta3 vanishes and the power carries no information about the
    wall at all.
    """
    if not np.isfinite(y0) or y0 < 0.0:
        raise DomainError(f"initial power y0 must be finite and >= 0, got {y0}")
    _validate_record(record)
    th = _as_theta_array(theta)
    h_wa = th[2] * geom.wall_air_conductance_base
    if y0 == 0.0 or h_wa == 0.0:
        return wall_equilibrium(record, th, geom)
    h_ext, gain_fixed, gain_albedo = _record_gains(record, geom)
    q_solar = gain_fixed + th[0] * gain_albedo
    residual = (y0
                - (geom.ventilation_conductance + th[1] * geom.bridge_conductance_base)
                * (record.t_set - record.t_ext)
                + (1.0 - WALL_SOLAR_FRACTION) * q_solar)
    return record.t_set - residual / h_wa


def step(state: float, record: ForcingRecord, theta, geom: CellGeometry,
         dt: float) -> tuple[float, float]:
    """Advance the wall one step; return (new wall temperature, power).

    Parameters
    ----------
    state : float
        Wall temperature at the start of the step, degC.
    record : ForcingRecord
        Forcing held constant over the step.
    theta : ParameterVector or array-like
        Calibration factors.
    geom : CellGeometry
    dt : float
        Step length in seconds, > 0.
    """
    if not np.isfinite(state):
        raise DomainError(f"state (wall temperature) is not finite: {state}")
    if not np.isfinite(dt) or dt <= 0.0:
        raise DomainError(f"dt must be finite and > 0, got {dt}")
    _validate_record(record)
    th = _as_theta_array(theta)
    if not np.all(np.isfinite(th)):
        raise DomainError("theta contains non-finite components")
    h_ext, gain_fixed, gain_albedo = _record_gains(record, geom)
    t_new, power = _kernels.step_exact(
        float(state), record.t_ext, record.t_set, h_ext, gain_fixed, gain_albedo,
        th[0], th[1], th[2],
        geom.wall_air_conductance_base, geom.bridge_conductance_base,
        geom.ventilation_conductance, geom.wall_capacitance,
        WALL_SOLAR_FRACTION, float(dt))
    return float(t_new), float(power)


class _CompiledForcing:
    """Forcing and geometry folded into the arrays the jitted loop consumes.

    Building one of these once per (forcing, geometry) pair and reusing it
    is what makes calibration runs cheap; `simulate` builds a throwaway one.
    """

    def __init__(self, forcing: ForcingMatrix, geom: CellGeometry):
        self.forcing = forcing
        self.geom = geom
        self.n = forcing.n
        self.dt = forcing.dt
        self.t_ext = forcing.t_ext
        self.t_set = forcing.t_set
        self.h_ext = geom.wall_conductance + geom.wind_film_slope * forcing.wind
        gain_scale = geom.window_area * geom.window_solar_factor
        self.gain_fixed = gain_scale * (forcing.i_beam + forcing.i_diff)
        self.gain_albedo = gain_scale * geom.ground_view_factor * forcing.i_ghi

    def run(self, theta: np.ndarray, y0: float) -> np.ndarray:
        geom = self.geom
        t_wall0 = initial_wall_temperature(y0, self.forcing.record(0), theta, geom)
        out = np.empty(self.n, dtype=float)
        _kernels.simulate_loop(
            t_wall0, self.dt, self.t_ext, self.t_set, self.h_ext,
            self.gain_fixed, self.gain_albedo,
            float(theta[0]), float(theta[1]), float(theta[2]),
            geom.wall_air_conductance_base, geom.bridge_conductance_base,
            geom.ventilation_conductance, geom.wall_capacitance,
            WALL_SOLAR_FRACTION, out)
        bad = np.flatnonzero(~np.isfinite(out))
        if bad.size:
            k = int(bad[0])
            raise SimulationError(f"simulation produced a non-finite power at time index {k}",
                                  time_index=k)
        return out


def simulate(theta, y0: float, forcing: ForcingMatrix, geom: CellGeometry) -> PredictionSeries:
    """Run the surrogate over a forcing series.

    The wall starts from the state implied by the initial measured power
    `y0` (see `initial_wall_temperature`), then the exponential update is
    applied record by record.  Bit-for-bit deterministic for identical
    inputs.
    """
    th = _as_theta_array(theta)
    if not np.all(np.isfinite(th)):
        raise DomainError("theta contains non-finite components")
    powers = _CompiledForcing(forcing, geom).run(th, float(y0))
    return PredictionSeries(powers=powers, initial_power=float(y0))


def block_average(values, block_count: int) -> np.ndarray:
    """Average a series over `block_count` contiguous blocks.

    The first ``n % block_count`` blocks take one extra entry, so, e.g.,
    2016 five-minute records averaged into 30 blocks give 6 blocks of 68
    followed by 24 blocks of 67.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"block_average expects a 1-d series, got shape {x.shape}")
    n = x.size
    if not isinstance(block_count, (int, np.integer)):
        raise DomainError(f"block_count must be an integer, got {block_count!r}")
    if block_count < 1 or block_count > n:
        raise DomainError(f"block_count must lie in [1, {n}], got {block_count}")
    base, extra = divmod(n, block_count)
    sizes = np.full(block_count, base, dtype=np.int64)
    sizes[:extra] += 1
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    return np.add.reduceat(x, offsets) / sizes


def block_sizes(n: int, block_count: int) -> np.ndarray:
    """Block lengths used by `block_average` for a series of length n."""
    if block_count < 1 or block_count > n:
        raise DomainError(f"block_count must lie in [1, {n}], got {block_count}")
    base, extra = divmod(n, block_count)
    sizes = np.full(block_count, base, dtype=np.int64)
    sizes[:extra] += 1
    return sizes
