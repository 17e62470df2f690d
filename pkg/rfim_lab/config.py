"""
config.py - Experiment configuration

One ExperimentConfig describes a run completely: what to measure, the model,
the scales, how many replicas, the seed every replica seed derives from, and
where results go. Values are layered

    DEFAULTS  <  environment (RFIM_*)  <  YAML file  <  command-line flags

and the resolved config is echoed into every summary.json.

Experiment Kinds:
    - m-scan: order parameter m(L) over the scales, with decay fits
    - surface-tension: T = 0 surface tension, B, thresholds identity over l in scales
    - variance: moments and anti-concentration of D_l
    - covariance: truncated correlations against the decoupling bounds
    - posT: positive-temperature surface tension, B-tilde and cross ratios
    - curdling: large-field frequencies and curdled spins on a 3^N window
    - mandelbrot: fractal percolation over a removal-probability grid
    - high-disorder: exceptional-site density and percolation decay
    - avalanche: cluster statistics of ground-state flips along an h grid

Usage:
    from rfim_lab.config import ExperimentConfig, validate_config

    config = ExperimentConfig.from_args(config_path="config/rfim_config.yml", replicas=500)
    result = validate_config(config)
    if not result["valid"]:
        print(result["errors"])

Environment Variables:
    RFIM_KIND         - Experiment kind (default: m-scan)
    RFIM_J            - Coupling strength (default: 1.0)
    RFIM_H            - Uniform field (default: 0.0)
    RFIM_EPSILON      - Disorder strength (default: 1.0)
    RFIM_TEMPERATURE  - Temperature, 0 for ground states (default: 0.0)
    RFIM_RANGE        - Coupling range R, 1 for nearest neighbour (default: 1)
    RFIM_SCALES       - Comma-separated scales (default: 1,2,4,8)
    RFIM_REPLICAS     - Replicas per scale (default: 200)
    RFIM_SEED         - Base seed (default: 0)
    RFIM_ENGINE       - exact or mcmc (default: exact)
    RFIM_SWEEPS       - Heat-bath sweeps (default: 20000)
    RFIM_THREADS      - Worker processes (default: 1)
    RFIM_OUT          - Output directory (default: results)
    RFIM_LOG_LEVEL    - Logging level (default: INFO)
"""

import hashlib
import json
import os
import re
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional

import yaml

from rfim_lab.disorder import DisorderParams
from rfim_lab.errors import ConfigError
from rfim_lab.gibbs import Engine
from rfim_lab.heat_bath import HeatBathSettings
from rfim_lab.lattice import CouplingSpec
from rfim_lab.mandelbrot import MAX_LEVELS


class ExperimentKind(Enum):
    """Experiments the harness can dispatch."""
    M_SCAN = "m-scan"
    SURFACE_TENSION = "surface-tension"
    VARIANCE = "variance"
    COVARIANCE = "covariance"
    POST = "posT"
    CURDLING = "curdling"
    MANDELBROT = "mandelbrot"
    HIGH_DISORDER = "high-disorder"
    AVALANCHE = "avalanche"


# Default configuration values
DEFAULTS = {
    "kind": "m-scan",
    "J": 1.0,
    "h": 0.0,
    "epsilon": 1.0,
    "temperature": 0.0,
    "coupling_range": 1,
    "scales": [1, 2, 4, 8],
    "replicas": 200,
    "seed": 0,
    "engine": "exact",
    "sweeps": 20000,
    "burn_in": None,
    "threads": 1,
    "out": "results",
    "log_level": "INFO",
    "levels": 3,
    "p_grid": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    "distance": 5,
    "alpha": None,
    "h_grid": [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
}

# Kinds computed from ground states only
GROUND_STATE_KINDS = (
    ExperimentKind.SURFACE_TENSION,
    ExperimentKind.CURDLING,
    ExperimentKind.HIGH_DISORDER,
    ExperimentKind.AVALANCHE,
)

# Fields that do not change any number in the output
NON_NUMERIC_FIELDS = ("threads", "out", "log_level")

ENV_PREFIX = "RFIM_"

_ENV_VAR = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::([^}]*))?\}")


def _int_list(text: str) -> List[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("null", "none") else float(text)


def _burn_in(text: str) -> Optional[int]:
    return None if text.strip().lower() == "auto" else int(text)


@dataclass
class ExperimentConfig:
    """
    Complete description of one experiment.

    Attributes:
        kind: Experiment to run.
        J: Coupling strength on every coupled displacement.
        h: Uniform external field.
        epsilon: Disorder strength.
        temperature: Temperature (0 selects ground states).
        coupling_range: R of the isotropic coupling (1 = nearest neighbour).
        scales: L (m-scan) or l values (every other kind).
        replicas: Replicas per scale (samples for mandelbrot).
        seed: Base seed of every replica seed.
        engine: Gibbs engine at T > 0.
        sweeps: Heat-bath sweeps per chain.
        burn_in: Heat-bath burn-in (None: automatic).
        threads: Worker processes.
        out: Output directory.
        log_level: Logging level name.
        levels: Curdling max level / Mandelbrot levels.
        p_grid: Mandelbrot removal probabilities.
        distance: Covariance separation |u - v| (u = origin, v = (distance, 0)).
        alpha: Exponent of the conditional variance bound (None: skip it).
        h_grid: Avalanche field grid.
    """
    kind: ExperimentKind = ExperimentKind(DEFAULTS["kind"])
    J: float = DEFAULTS["J"]
    h: float = DEFAULTS["h"]
    epsilon: float = DEFAULTS["epsilon"]
    temperature: float = DEFAULTS["temperature"]
    coupling_range: int = DEFAULTS["coupling_range"]
    scales: List[int] = field(default_factory=lambda: list(DEFAULTS["scales"]))
    replicas: int = DEFAULTS["replicas"]
    seed: int = DEFAULTS["seed"]
    engine: Engine = Engine(DEFAULTS["engine"])
    sweeps: int = DEFAULTS["sweeps"]
    burn_in: Optional[int] = DEFAULTS["burn_in"]
    threads: int = DEFAULTS["threads"]
    out: str = DEFAULTS["out"]
    log_level: str = DEFAULTS["log_level"]
    levels: int = DEFAULTS["levels"]
    p_grid: List[float] = field(default_factory=lambda: list(DEFAULTS["p_grid"]))
    distance: int = DEFAULTS["distance"]
    alpha: Optional[float] = DEFAULTS["alpha"]
    h_grid: List[float] = field(default_factory=lambda: list(DEFAULTS["h_grid"]))

    # -------------------------------------------------------------------------
    # Derived model objects
    # -------------------------------------------------------------------------

    @property
    def params(self) -> DisorderParams:
        return DisorderParams(self.h, self.epsilon, self.temperature)

    @property
    def coupling(self) -> CouplingSpec:
        if self.coupling_range == 1:
            return CouplingSpec.nearest_neighbor(self.J)
        return CouplingSpec.isotropic(self.J, self.coupling_range)

    @property
    def settings(self) -> HeatBathSettings:
        return HeatBathSettings(sweeps=self.sweeps, burn_in=self.burn_in, chain_seed=self.seed)

    # -------------------------------------------------------------------------
    # Construction
    # -------------------------------------------------------------------------

    @classmethod
    def from_env(cls) -> "ExperimentConfig":
        """
        Create configuration from RFIM_* environment variables.

        Returns:
            ExperimentConfig: Defaults overridden by whatever is set.

        Raises:
            ConfigError: A variable does not parse.
        """
        config = cls()
        env = os.environ
        parsers = {
            "KIND": ("kind", ExperimentKind),
            "J": ("J", float),
            "H": ("h", float),
            "EPSILON": ("epsilon", float),
            "TEMPERATURE": ("temperature", float),
            "RANGE": ("coupling_range", int),
            "SCALES": ("scales", _int_list),
            "REPLICAS": ("replicas", int),
            "SEED": ("seed", int),
            "ENGINE": ("engine", lambda v: Engine(v.lower())),
            "SWEEPS": ("sweeps", int),
            "BURN_IN": ("burn_in", _burn_in),
            "THREADS": ("threads", int),
            "OUT": ("out", str),
            "LOG_LEVEL": ("log_level", str.upper),
            "LEVELS": ("levels", int),
            "P_GRID": ("p_grid", _float_list),
            "DISTANCE": ("distance", int),
            "ALPHA": ("alpha", _optional_float),
            "H_GRID": ("h_grid", _float_list),
        }
        for suffix, (name, parse) in parsers.items():
            raw = env.get(ENV_PREFIX + suffix)
            if raw is None or raw == "":
                continue
            try:
                setattr(config, name, parse(raw))
            except ValueError as e:
                raise ConfigError(f"{ENV_PREFIX}{suffix}={raw!r}: {e}", [f"{ENV_PREFIX}{suffix}"]) from None
        return config

    @classmethod
    def from_file(cls, path: str, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        """
        Apply a YAML config file on top of base (default: from_env()).

        ${VAR:default} references are substituted before parsing.

        Raises:
            ConfigError: Unreadable file, bad YAML or unknown keys.
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from None
        try:
            document = yaml.safe_load(substitute_env(text)) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML in {path}: {e}") from None
        if not isinstance(document, dict):
            raise ConfigError(f"{path} must hold a mapping of sections")
        config = base if base is not None else cls.from_env()
        return apply_mapping(config, flatten_sections(document))

    @classmethod
    def from_args(
        cls,
        config_path: Optional[str] = None,
        kind: Optional[str] = None,
        seed: Optional[int] = None,
        replicas: Optional[int] = None,
        threads: Optional[int] = None,
        engine: Optional[str] = None,
        out: Optional[str] = None,
        scales: Optional[List[int]] = None,
        **overrides: Any,
    ) -> "ExperimentConfig":
        """
        Create configuration from arguments with file and environment fallback.

        Args:
            config_path: YAML file layered over the environment.
            kind: Experiment kind.
            seed: Base seed.
            replicas: Replicas per scale.
            threads: Worker processes.
            engine: "exact" or "mcmc".
            out: Output directory.
            scales: Scale list.
            **overrides: Any other ExperimentConfig field; None values are ignored.

        Returns:
            ExperimentConfig: Configuration with argument overrides.
        """
        config = cls.from_env()
        if config_path is not None:
            config = cls.from_file(config_path, base=config)
        given = {
            "kind": kind, "seed": seed, "replicas": replicas, "threads": threads,
            "engine": engine, "out": out, "scales": scales, **overrides,
        }
        return apply_mapping(config, {k: v for k, v in given.items() if v is not None})

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        data["engine"] = self.engine.value
        return data

    def __str__(self) -> str:
        return (
            f"{self.kind.value}: J={self.J:g} h={self.h:g} eps={self.epsilon:g} "
            f"T={self.temperature:g} R={self.coupling_range} scales={self.scales} "
            f"replicas={self.replicas} seed={self.seed} engine={self.engine.value}"
        )


def substitute_env(text: str) -> str:
    """Replace ${VAR} and ${VAR:default} with environment values."""
    def lookup(match: re.Match) -> str:
        name, default = match.group(1), match.group(2)
        value = os.environ.get(name)
        if value is None:
            if default is None:
                raise ConfigError(f"environment variable {name} is not set and has no default", [name])
            return default
        return value
    return _ENV_VAR.sub(lookup, text)


# YAML section/key -> ExperimentConfig field
_SECTION_KEYS = {
    ("experiment", "kind"): "kind",
    ("experiment", "scales"): "scales",
    ("experiment", "levels"): "levels",
    ("experiment", "p_grid"): "p_grid",
    ("experiment", "distance"): "distance",
    ("experiment", "alpha"): "alpha",
    ("experiment", "h_grid"): "h_grid",
    ("model", "J"): "J",
    ("model", "h"): "h",
    ("model", "epsilon"): "epsilon",
    ("model", "temperature"): "temperature",
    ("model", "range"): "coupling_range",
    ("sampling", "replicas"): "replicas",
    ("sampling", "seed"): "seed",
    ("sampling", "engine"): "engine",
    ("sampling", "sweeps"): "sweeps",
    ("sampling", "burn_in"): "burn_in",
    ("execution", "threads"): "threads",
    ("output", "directory"): "out",
    ("logging", "level"): "log_level",
}


def flatten_sections(document: Mapping[str, Any]) -> Dict[str, Any]:
    """Map the sectioned YAML layout onto flat field names."""
    flat: Dict[str, Any] = {}
    unknown = []
    for section, body in document.items():
        if not isinstance(body, dict):
            unknown.append(str(section))
            continue
        for key, value in body.items():
            name = _SECTION_KEYS.get((section, key))
            if name is None:
                unknown.append(f"{section}.{key}")
            else:
                flat[name] = value
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", [f"unknown key {k}" for k in unknown])
    return flat


def _coerce(name: str, value: Any) -> Any:
    if name == "kind":
        return value if isinstance(value, ExperimentKind) else ExperimentKind(str(value))
    if name == "engine":
        return value if isinstance(value, Engine) else Engine(str(value).lower())
    if name == "scales":
        if isinstance(value, (int, float)):
            return [int(value)]
        return _int_list(value) if isinstance(value, str) else [int(v) for v in value]
    if name in ("p_grid", "h_grid"):
        if isinstance(value, (int, float)):
            return [float(value)]
        return _float_list(value) if isinstance(value, str) else [float(v) for v in value]
    if name in ("J", "h", "epsilon", "temperature"):
        return float(value)
    if name == "alpha":
        return None if value is None else float(value)
    if name == "burn_in":
        return None if value in (None, "", "auto") else int(value)
    if name in ("coupling_range", "replicas", "seed", "sweeps", "threads", "levels", "distance"):
        return int(value)
    if name == "log_level":
        return str(value).upper()
    return str(value)


def apply_mapping(config: ExperimentConfig, values: Mapping[str, Any]) -> ExperimentConfig:
    """
    Return a copy of config with the given fields replaced.

    Raises:
        ConfigError: Unknown field or a value that does not parse.
    """
    updates = {}
    errors = []
    for name, value in values.items():
        if name not in ExperimentConfig.__dataclass_fields__:
            errors.append(f"unknown field '{name}'")
            continue
        try:
            updates[name] = _coerce(name, value)
        except (TypeError, ValueError) as e:
            errors.append(f"{name}: cannot use {value!r} ({e})")
    if errors:
        raise ConfigError("; ".join(errors), errors)
    return replace(config, **updates)


# =============================================================================
# Validation
# =============================================================================


def validate_config(config: ExperimentConfig) -> dict:
    """
    Check every precondition the dispatched experiment will rely on.

    Args:
        config: ExperimentConfig to validate.

    Returns:
        dict: Validation result with 'valid' bool, 'errors' and 'warnings' lists.
    """
    result = {"valid": True, "errors": [], "warnings": []}
    errors, warnings = result["errors"], result["warnings"]
    kind = config.kind

    if config.replicas < 1:
        errors.append(f"replicas must be >= 1, got {config.replicas}")
    elif config.replicas < 2 and kind not in (ExperimentKind.CURDLING,):
        errors.append("at least 2 replicas are needed for standard errors")
    elif config.replicas < 2:
        warnings.append("a single replica gives no standard errors")
    if config.threads < 1:
        errors.append(f"threads must be >= 1, got {config.threads}")
    elif config.threads > (os.cpu_count() or 1):
        warnings.append(f"threads ({config.threads}) exceeds the CPU count ({os.cpu_count()})")
    if config.epsilon < 0:
        errors.append(f"epsilon must be >= 0, got {config.epsilon}")
    if config.temperature < 0:
        errors.append(f"temperature must be >= 0, got {config.temperature}")
    if config.J < 0:
        errors.append("negative couplings are not supported (non-submodular energy)")
    if config.coupling_range < 1:
        errors.append(f"coupling range must be >= 1, got {config.coupling_range}")
    if config.seed < 0:
        errors.append(f"seed must be non-negative, got {config.seed}")

    if config.engine == Engine.MCMC:
        if config.temperature == 0:
            errors.append("the mcmc engine needs temperature > 0")
        burn_in = config.burn_in if config.burn_in is not None else 0
        if config.sweeps <= burn_in:
            errors.append(f"sweeps ({config.sweeps}) must exceed burn_in ({config.burn_in})")

    scaled = kind not in (ExperimentKind.MANDELBROT, ExperimentKind.CURDLING)
    if scaled:
        if not config.scales:
            errors.append("scales must not be empty")
        elif any(s < 0 for s in config.scales):
            errors.append(f"scales must be non-negative, got {config.scales}")
        elif kind != ExperimentKind.M_SCAN and any(s < 1 for s in config.scales):
            errors.append(f"{kind.value} scales must be >= 1, got {config.scales}")
        elif any(b <= a for a, b in zip(config.scales, config.scales[1:])):
            errors.append(f"scales must be strictly increasing, got {config.scales}")

    if kind == ExperimentKind.M_SCAN and len(config.scales) < 4:
        warnings.append("fewer than 4 scales: decay fits will be skipped")
    if kind == ExperimentKind.VARIANCE:
        if config.replicas < 100:
            errors.append(f"variance needs at least 100 replicas, got {config.replicas}")
        if config.alpha is not None and not 0 < config.alpha <= 0.25:
            errors.append(f"alpha must lie in (0, 1/4], got {config.alpha}")
    if kind == ExperimentKind.COVARIANCE and config.scales:
        if config.distance <= max(config.scales):
            errors.append(f"covariance distance ({config.distance}) must exceed every scale {config.scales}")
    if kind == ExperimentKind.POST and config.temperature <= 0:
        errors.append("posT experiments need temperature > 0")
    if kind in (ExperimentKind.CURDLING, ExperimentKind.HIGH_DISORDER) and config.coupling_range != 1:
        errors.append(f"{kind.value} is defined for nearest-neighbour couplings (range 1)")
    if kind in (ExperimentKind.CURDLING, ExperimentKind.MANDELBROT):
        if not 0 <= config.levels <= MAX_LEVELS:
            errors.append(f"levels must lie in [0, {MAX_LEVELS}], got {config.levels}")
    if kind == ExperimentKind.CURDLING and config.epsilon == 0:
        warnings.append("epsilon = 0: no large-field events, every site will be capped")
    if kind == ExperimentKind.MANDELBROT:
        if not config.p_grid or any(not 0.0 <= p <= 1.0 for p in config.p_grid):
            errors.append(f"p_grid values must lie in [0, 1], got {config.p_grid}")
        elif any(b <= a for a, b in zip(config.p_grid, config.p_grid[1:])):
            errors.append("p_grid must be strictly increasing")
    if kind == ExperimentKind.AVALANCHE:
        if not config.h_grid or any(b <= a for a, b in zip(config.h_grid, config.h_grid[1:])):
            errors.append("h_grid must be non-empty and strictly increasing")
    if config.temperature > 0 and kind in GROUND_STATE_KINDS:
        warnings.append(f"{kind.value} works at T = 0; temperature {config.temperature:g} is ignored")

    result["valid"] = not errors
    return result


def require_valid(config: ExperimentConfig) -> None:
    """Raise ConfigError listing every validation error."""
    result = validate_config(config)
    if not result["valid"]:
        raise ConfigError("invalid experiment configuration: " + "; ".join(result["errors"]), result["errors"])


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of every field that affects numbers."""
    data = config.to_dict()
    for name in NON_NUMERIC_FIELDS:
        data.pop(name, None)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
