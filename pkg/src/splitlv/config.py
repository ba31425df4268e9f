"""Experiment configuration files (JSON, ``schema_version`` 1).

Unknown keys are rejected.  Step sizes are given as negative powers of two:
``"ladder": [4, 5]`` means h = 2**-4 and 2**-5.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .integrators import Scheme
from .model import ModelParams, State, validate_params

__all__ = ["ExperimentConfig", "PhaseAreaConfig", "SympcheckConfig", "SCHEMA", "load_config", "parse_config"]

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}, "minItems": 1}
_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_level = {"type": "integer", "minimum": 0, "maximum": 40}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "model", "initial_state", "horizon", "master_seed"],
    "properties": {
        "schema_version": {"const": 1},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["d", "m", "gamma1", "gamma2", "eta1", "eta2", "sigma1", "sigma2"],
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "gamma1": _matrix,
                "gamma2": _matrix,
                "eta1": _vector,
                "eta2": _vector,
                "sigma1": _matrix,
                "sigma2": _matrix,
            },
        },
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x", "y"],
            "properties": {"x": _vector, "y": _vector},
        },
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "schemes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "ladder": {"type": "array", "items": _level, "minItems": 2},
        "reference_level": _level,
        "n_paths": {"type": "integer", "minimum": 2},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**63 - 1},
        "moment_order": {"type": "number", "minimum": 1},
        "step_level": _level,
        "simulate_paths": {"type": "integer", "minimum": 1},
        "phase_area": {
            "type": "object",
            "additionalProperties": False,
            "required": ["starts"],
            "properties": {
                "starts": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "minItems": 3,
                    "maxItems": 3,
                },
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "step_level": _level,
                "reference_level": _level,
            },
        },
        "sympcheck": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trials": {"type": "integer", "minimum": 1},
                "min_level": _level,
                "max_level": _level,
                "em_level": _level,
            },
        },
        "output_dir": {"type": "string"},
    },
}


@dataclass(frozen=True)
class PhaseAreaConfig:
    starts: tuple
    horizon: float = 10.0
    step_level: int = 6
    reference_level: int = 10

    @property
    def h(self) -> float:
        return 2.0**-self.step_level

    @property
    def h_ref(self) -> float:
        return 2.0**-self.reference_level

    def start_states(self):
        return [State([x], [y]) for x, y in self.starts]


@dataclass(frozen=True)
class SympcheckConfig:
    trials: int = 100
    min_level: int = 4
    max_level: int = 10
    em_level: int = 4


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    initial_state: State
    horizon: float
    master_seed: int
    schemes: tuple = (Scheme.STRANG, Scheme.LIE_TROTTER, Scheme.EULER_MARUYAMA)
    ladder: tuple = (4, 5, 6, 7, 8, 9)
    reference_level: int = 12
    n_paths: int = 256
    moment_order: float = 2.0
    step_level: int = 6
    simulate_paths: int = 1
    phase_area: PhaseAreaConfig | None = None
    sympcheck: SympcheckConfig = field(default_factory=SympcheckConfig)
    output_dir: str = "out"

    @property
    def step_sizes(self) -> list:
        return [2.0**-i for i in self.ladder]

    @property
    def h_ref(self) -> float:
        return 2.0**-self.reference_level

    @property
    def h(self) -> float:
        return 2.0**-self.step_level

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a decoded JSON document and build an :class:`ExperimentConfig`."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None

    params = validate_params(ModelParams.from_dict(data["model"]))
    z0 = State(data["initial_state"]["x"], data["initial_state"]["y"])
    if z0.x.shape != (params.d,):
        raise ConfigError("initial_state: length must equal model.d")
    if not z0.is_positive():
        raise ConfigError("initial_state: entries must be strictly positive")

    kw = {}
    if "schemes" in data:
        try:
            kw["schemes"] = tuple(dict.fromkeys(Scheme.parse(s) for s in data["schemes"]))
        except ValueError as exc:
            raise ConfigError(f"schemes: {exc}") from None
    for key in ("reference_level", "n_paths", "moment_order", "step_level", "simulate_paths", "output_dir"):
        if key in data:
            kw[key] = data[key]
    if "ladder" in data:
        ladder = tuple(sorted(set(data["ladder"])))
        if len(ladder) < 2:
            raise ConfigError("ladder: need at least two distinct levels")
        kw["ladder"] = ladder
    if "phase_area" in data:
        pa = dict(data["phase_area"])
        pa["starts"] = tuple(tuple(float(v) for v in s) for s in pa["starts"])
        kw["phase_area"] = PhaseAreaConfig(**pa)
        if params.d != 1:
            raise ConfigError("phase_area: only defined for d = 1")
    if "sympcheck" in data:
        kw["sympcheck"] = SympcheckConfig(**data["sympcheck"])
        if kw["sympcheck"].min_level > kw["sympcheck"].max_level:
            raise ConfigError("sympcheck: min_level exceeds max_level")

    cfg = ExperimentConfig(params, z0, float(data["horizon"]), int(data["master_seed"]), **kw)
    if cfg.reference_level <= max(cfg.ladder):
        raise ConfigError("reference_level must be finer than every ladder level")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(data)
