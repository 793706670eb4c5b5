"""Run configuration.

A run is described by one YAML file with sections `paths`, `prior`,
`mcmc`, `validation`, `decision`, `sensitivity`, `synthetic` plus the
top-level `block_count` and `y0`.  Every field has a default, so an empty
file (or no file) is a valid smoke-test run; unknown keys are rejected
rather than ignored, since a typo silently falling back to a default is
the worst failure mode a config can have.

Input paths may use the ``builtin:<name>`` scheme for the bundled fixture
data.  `config_hash` digests the fully-resolved settings (defaults and
command-line overrides included), so two runs share a hash exactly when
every effective field agrees.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .fixtures import resolve_path
from .mcmc import AdaptationPolicy
from .thermal import DEFAULT_THETA_LOWER, DEFAULT_THETA_UPPER


def _section(raw: dict, name: str, allowed: set[str]) -> dict:
    body = raw.get(name) or {}
    if not isinstance(body, dict):
        raise ConfigError(f"section {name!r} must be a mapping, got {type(body).__name__}")
    unknown = set(body) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in section {name!r}: "
                          f"{', '.join(sorted(unknown))}; allowed: {', '.join(sorted(allowed))}")
    return body


def _coerce(value, kind, where: str):
    try:
        if kind is float:
            out = float(value)
        elif kind is int:
            out = int(value)
            if isinstance(value, float) and value != out:
                raise ValueError
        elif kind is bool:
            if not isinstance(value, bool):
                raise ValueError
            out = value
        elif kind is str:
            if not isinstance(value, str):
                raise ValueError
            out = value
        else:  # list of floats
            out = [float(v) for v in value]
        return out
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot interpret {value!r} as {getattr(kind, '__name__', kind)}") from None


@dataclass
class PathsConfig:
    forcing: str = "builtin:forcing_7day"
    geometry: str = "builtin:geometry_default"
    measurements: str = "builtin:measurements_7day"
    out: str = "runs/out"


@dataclass
class PriorConfig:
    theta_lower: list[float] = field(default_factory=lambda: [float(v) for v in DEFAULT_THETA_LOWER])
    theta_upper: list[float] = field(default_factory=lambda: [float(v) for v in DEFAULT_THETA_UPPER])

    def __post_init__(self):
        lo, up = np.asarray(self.theta_lower, float), np.asarray(self.theta_upper, float)
        if lo.shape != (3,) or up.shape != (3,):
            raise ConfigError("prior bounds must each list 3 values")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(up)) or not np.all(lo < up):
            raise ConfigError("prior bounds must be finite with lower < upper componentwise")


@dataclass
class McmcConfig:
    n_iter: int = 60000
    burn_in: int = 10000
    thin: int = 10
    seed: int = 0
    chains: int = 1
    lambda2_update: str = "gibbs"
    window: int = 50
    target_low: float = 0.2
    target_high: float = 0.5
    expand: float = 1.1
    shrink: float = 0.9
    horizon: int | None = None

    def __post_init__(self):
        if self.chains < 1:
            raise ConfigError(f"mcmc.chains must be >= 1, got {self.chains}")
        if self.seed < 0:
            raise ConfigError(f"mcmc.seed must be >= 0, got {self.seed}")
        if self.lambda2_update not in ("gibbs", "rw"):
            raise ConfigError(f"mcmc.lambda2_update must be 'gibbs' or 'rw', "
                              f"got {self.lambda2_update!r}")
        if not 0 <= self.burn_in < self.n_iter or self.thin < 1:
            raise ConfigError(f"mcmc settings violate 0 <= burn_in < n_iter and thin >= 1: "
                              f"n_iter={self.n_iter}, burn_in={self.burn_in}, thin={self.thin}")
        try:
            self.policy()
        except DomainError as exc:
            raise ConfigError(f"mcmc adaptation settings invalid: {exc}") from None

    def policy(self) -> AdaptationPolicy:
        return AdaptationPolicy(target_low=self.target_low, target_high=self.target_high,
                                expand=self.expand, shrink=self.shrink,
                                window=self.window, horizon=self.horizon)


@dataclass
class ValidationConfig:
    alpha: float = 0.05
    min_draws: int = 100

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"validation.alpha must lie in (0, 1), got {self.alpha}")
        if self.min_draws < 100:
            raise ConfigError(f"validation.min_draws must be >= 100, got {self.min_draws}")


@dataclass
class DecisionConfig:
    m: float = 1.0
    c_values: list[float] = field(default_factory=lambda: [0.01, 0.2])
    grid_points: int = 201
    tol: float = 0.01

    def __post_init__(self):
        if self.m <= 0.0:
            raise ConfigError(f"decision.m must be > 0, got {self.m}")
        if not self.c_values:
            raise ConfigError("decision.c_values must list at least one value")
        if any(c < 0.0 for c in self.c_values):
            raise ConfigError(f"decision.c_values must all be >= 0, got {self.c_values}")
        if self.grid_points < 3 or self.tol <= 0.0:
            raise ConfigError(f"decision search settings invalid: grid_points="
                              f"{self.grid_points}, tol={self.tol}")


@dataclass
class SensitivityConfig:
    nominal: list[float] | None = None  # default: prior box midpoint
    fraction: float = 0.05
    threshold: float | None = None      # must be set to run the screening
    sobol_n: int = 10000

    def __post_init__(self):
        if not 0.0 < self.fraction < 0.5:
            raise ConfigError(f"sensitivity.fraction must lie in (0, 0.5), got {self.fraction}")
        if self.threshold is not None and self.threshold < 0.0:
            raise ConfigError(f"sensitivity.threshold must be >= 0, got {self.threshold}")
        if self.sobol_n < 1000:
            raise ConfigError(f"sensitivity.sobol_n must be >= 1000, got {self.sobol_n}")
        if self.nominal is not None and len(self.nominal) != 3:
            raise ConfigError("sensitivity.nominal must list 3 values")

    def require_threshold(self) -> float:
        if self.threshold is None:
            raise ConfigError("sensitivity.threshold is required for screening; "
                              "set it in the config file")
        return self.threshold


@dataclass
class SyntheticConfig:
    theta0: list[float] = field(default_factory=lambda: [0.175, 10.0, 5.0])
    noise_sd: float = 1.5
    bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.theta0) != 3:
            raise ConfigError("synthetic.theta0 must list 3 values")
        if self.noise_sd <= 0.0:
            raise ConfigError(f"synthetic.noise_sd must be > 0, got {self.noise_sd}")
        if self.seed < 0:
            raise ConfigError(f"synthetic.seed must be >= 0, got {self.seed}")


_SCHEMA = {
    "paths": {"forcing": str, "geometry": str, "measurements": str, "out": str},
    "prior": {"theta_lower": list, "theta_upper": list},
    "mcmc": {"n_iter": int, "burn_in": int, "thin": int, "seed": int, "chains": int,
             "lambda2_update": str, "window": int, "target_low": float,
             "target_high": float, "expand": float, "shrink": float, "horizon": int},
    "validation": {"alpha": float, "min_draws": int},
    "decision": {"m": float, "c_values": list, "grid_points": int, "tol": float},
    "sensitivity": {"nominal": list, "fraction": float, "threshold": float, "sobol_n": int},
    "synthetic": {"theta0": list, "noise_sd": float, "bias": float, "seed": int},
}

_SECTION_TYPES = {
    "paths": PathsConfig, "prior": PriorConfig, "mcmc": McmcConfig,
    "validation": ValidationConfig, "decision": DecisionConfig,
    "sensitivity": SensitivityConfig, "synthetic": SyntheticConfig,
}

_NULLABLE = {("mcmc", "horizon"), ("sensitivity", "nominal"), ("sensitivity", "threshold")}


@dataclass
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    block_count: int = 30
    y0: float = 0.0

    def __post_init__(self):
        if self.block_count < 1:
            raise ConfigError(f"block_count must be >= 1, got {self.block_count}")
        if self.y0 < 0.0:
            raise ConfigError(f"y0 must be >= 0 (0 selects the steady-state start), "
                              f"got {self.y0}")

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"no such config file: {path}")
        try:
            raw = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        top_allowed = set(_SCHEMA) | {"block_count", "y0"}
        unknown = set(raw) - top_allowed
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
        kwargs = {}
        for name, fields in _SCHEMA.items():
            body = _section(raw, name, set(fields))
            section_kwargs = {}
            for key, value in body.items():
                if value is None and (name, key) in _NULLABLE:
                    section_kwargs[key] = None
                else:
                    section_kwargs[key] = _coerce(value, fields[key], f"{name}.{key}")
            kwargs[name] = _SECTION_TYPES[name](**section_kwargs)
        if "block_count" in raw:
            kwargs["block_count"] = _coerce(raw["block_count"], int, "block_count")
        if "y0" in raw:
            kwargs["y0"] = _coerce(raw["y0"], float, "y0")
        return cls(**kwargs)

    def as_dict(self) -> dict:
        def plain(obj):
            if hasattr(obj, "__dataclass_fields__"):
                return {k: plain(getattr(obj, k)) for k in obj.__dataclass_fields__}
            if isinstance(obj, (list, tuple)):
                return [plain(v) for v in obj]
            return obj
        return plain(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def resolved_path(self, which: str) -> Path:
        spec = getattr(self.paths, which)
        try:
            return resolve_path(spec)
        except ConfigError as exc:
            raise ConfigError(f"paths.{which}: {exc}") from None

    def require_inputs(self, names: tuple[str, ...]) -> dict[str, Path]:
        """Resolve and existence-check the inputs a command consumes."""
        out = {}
        for name in names:
            p = self.resolved_path(name)
            if not p.exists():
                raise ConfigError(f"paths.{name}: no such file: {p}")
            out[name] = p
        return out
