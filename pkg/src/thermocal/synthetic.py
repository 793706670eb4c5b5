"""Synthetic winter-week fixture and measurement fabrication.

The shipped forcing file is generated by `default_forcing`: seven winter
days at five-minute resolution with a sinusoidal daily exterior
temperature, deterministic day-to-day weather variety (clearness, wind)
and a constant 20 degC setpoint.  Nothing here is measured data; the
per-day tables were chosen so the nominal calibration factors produce
block-averaged heating powers between 150 and 200 W.

`generate_measurements` turns a forcing series into noisy block-averaged
power observations plus a truth sidecar recording exactly how they were
fabricated, so recovery studies can score themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .rng import DOMAIN_SYNTHETIC, substream
from .thermal import (
    DEFAULT_THETA_LOWER,
    DEFAULT_THETA_UPPER,
    CellGeometry,
    ForcingMatrix,
    block_average,
    simulate,
)

SECONDS_PER_DAY = 86400.0

# Per-day weather tables for the 7-day fixture.  Clear winter days run cold
# and calm, overcast ones warm and windy, which keeps the heating power
# inside a narrow band while still exercising every forcing channel.
_DAY_MEAN_TEXT = (1.83, 4.40, 0.91, 5.19, 3.17, 2.61, 3.93)  # degC
_DAY_CLEARNESS = (0.85, 0.45, 0.95, 0.30, 0.70, 0.55, 0.90)
_DAY_WIND_BASE = (1.4, 3.0, 1.0, 3.6, 2.2, 1.6, 3.2)         # m/s

_TEXT_AMPLITUDE = 1.0  # degC, warmest at 16:00
_SUNRISE_H = 8.0
_SUNSET_H = 16.5
_BEAM_PEAK = 25.0      # W/m^2 on the window plane, clear day
_DIFF_PEAK_CLEAR = 14.0
_DIFF_PEAK_CLOUD = 10.0
_GHI_PEAK_CLEAR = 60.0
_GHI_PEAK_BASE = 20.0


def default_forcing(n_days: int = 7, dt: float = 300.0) -> ForcingMatrix:
    """Deterministic synthetic forcing: `n_days` at step `dt` seconds."""
    if n_days < 1:
        raise DomainError(f"n_days must be >= 1, got {n_days}")
    if dt <= 0 or SECONDS_PER_DAY % dt:
        raise DomainError(f"dt must be > 0 and divide one day, got {dt}")
    n = int(n_days * SECONDS_PER_DAY / dt)
    t = np.arange(n) * dt
    day = (t // SECONDS_PER_DAY).astype(int) % len(_DAY_MEAN_TEXT)
    hour = (t % SECONDS_PER_DAY) / 3600.0

    mean = np.asarray(_DAY_MEAN_TEXT)[day]
    clear = np.asarray(_DAY_CLEARNESS)[day]
    wind_base = np.asarray(_DAY_WIND_BASE)[day]

    # Daily sinusoid, coldest before dawn, warmest late afternoon.
    t_ext = mean + _TEXT_AMPLITUDE * np.sin(2.0 * np.pi * (hour - 10.0) / 24.0)

    # Solar: half-sine between sunrise and sunset, scaled by clearness.
    up = (hour >= _SUNRISE_H) & (hour <= _SUNSET_H)
    shape = np.where(
        up, np.sin(np.pi * (hour - _SUNRISE_H) / (_SUNSET_H - _SUNRISE_H)), 0.0)
    i_beam = _BEAM_PEAK * clear * shape
    i_diff = (_DIFF_PEAK_CLEAR + _DIFF_PEAK_CLOUD * (1.0 - clear)) * shape
    i_ghi = (_GHI_PEAK_CLEAR * clear + _GHI_PEAK_BASE) * shape

    wind = (wind_base
            + 0.6 * np.sin(2.0 * np.pi * (hour - 12.0) / 24.0)
            + 0.4 * np.sin(2.0 * np.pi * t / (SECONDS_PER_DAY / 3.1)))
    wind = np.maximum(wind, 0.15)

    return ForcingMatrix(
        timestamps=t,
        t_ext=t_ext,
        i_beam=i_beam,
        i_diff=i_diff,
        i_ghi=i_ghi,
        wind=wind,
        t_set=np.full(n, 20.0),
    )


@dataclass
class SyntheticDataSpec:
    """Recipe for fabricating measurements from known ground truth."""

    theta0: np.ndarray = field(default_factory=lambda: np.array([0.175, 10.0, 5.0]))
    noise_sd: float = 1.5          # W, on the block-averaged series
    bias: float | np.ndarray = 0.0  # W, added after averaging
    seed: int = 0
    y0: float = 0.0                 # initial measured power handed to the model

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float)
        if self.theta0.shape != (3,):
            raise DomainError(f"theta0 must have 3 components, got shape {self.theta0.shape}")
        if np.any(self.theta0 < DEFAULT_THETA_LOWER) or np.any(self.theta0 > DEFAULT_THETA_UPPER):
            raise DomainError("theta0 lies outside the calibration support")
        if not np.isfinite(self.noise_sd) or self.noise_sd <= 0:
            raise DomainError(f"noise_sd must be finite and > 0, got {self.noise_sd}")


def block_timestamps(timestamps, block_count: int) -> np.ndarray:
    """Mid-block timestamps for an averaged series."""
    return block_average(np.asarray(timestamps, dtype=float), block_count)


def generate_measurements(spec: SyntheticDataSpec, forcing: ForcingMatrix,
                          geom: CellGeometry, block_count: int = 30):
    """Fabricate a measurement series; returns (timestamps, z, truth dict).

    z = block_average(simulate(theta0)) + bias + N(0, noise_sd^2) i.i.d.

    The truth dict records everything needed to score recovery against the
    generated data, including the noiseless period-mean power.
    """
    bias = np.asarray(spec.bias, dtype=float)
    if bias.ndim not in (0, 1):
        raise DomainError(f"bias must be a scalar or 1-d vector, got ndim {bias.ndim}")
    if bias.ndim == 1 and bias.size != block_count:
        raise DomainError(f"bias vector length {bias.size} != block_count {block_count}")

    pred = simulate(spec.theta0, spec.y0, forcing, geom)
    y = block_average(pred.powers, block_count)
    rng = substream(spec.seed, DOMAIN_SYNTHETIC)
    z = y + bias + spec.noise_sd * rng.standard_normal(block_count)
    truth = {
        "theta0": [float(v) for v in spec.theta0],
        "noise_sd": float(spec.noise_sd),
        "bias": float(bias) if bias.ndim == 0 else [float(v) for v in bias],
        "seed": int(spec.seed),
        "y0": float(spec.y0),
        "block_count": int(block_count),
        "true_mean_power_w": float(np.mean(y)),
    }
    return block_timestamps(forcing.timestamps, block_count), z, truth
