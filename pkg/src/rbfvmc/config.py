"""Flat ``dotted.key = value`` experiment configuration.

Example::

    # particle in a box, slope 2
    model.type = box
    model.slope = 2.0
    model.n_max = 20
    network.M = 10
    sr.alpha = 0.01
    sr.max_iter = 500
    run.seed = 0

Blank lines and ``#`` comments are ignored.  Unknown keys are errors so that
typos do not silently fall back to defaults.
"""
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, ContractViolation
from .hamiltonian import HO1D, HO2D, HermitianMatrix, ParticleBox
from .optimizer import SrConfig
from .sampler import SamplerConfig
from .wavefunction import Activation

MODEL_KEYS = {
    "ho1d": {"field": float, "n_max": int},
    "ho2d": {"field_x": float, "field_y": float, "n_max": int},
    "box": {"slope": float, "n_max": int},
    "matrix": {"d": int, "file": str},
}
NETWORK_KEYS = {"M": int, "activation": str, "scale": float, "center_span": float}
RUN_KEYS = {"seed": int, "restarts": int, "output": str, "name": str}


def parse_text(text, source="<string>"):
    """Parse ``key = value`` lines into an ordered dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_flat(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_text(text, str(path))


def _convert(key, value, kind):
    if kind is bool:
        low = value.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if value.lower() == "none":
        return None
    try:
        if kind is int:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {value!r} as {kind.__name__}") from None


def _dataclass_types(cls):
    hints = {"n_therm": int, "stride": int, "max_step": float}
    return {f.name: hints.get(f.name, type(f.default)) for f in fields(cls)}


@dataclass(frozen=True)
class ExperimentConfig:
    model_type: str
    model_args: dict
    M: int = 10
    activation: Activation = Activation.GAUSSIAN
    scale: float = 1.0
    center_span: float = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    sr: SrConfig = field(default_factory=SrConfig)
    seed: int = 0
    restarts: int = 1
    output: str = None
    name: str = "run"
    base_dir: Path = None

    def build_model(self):
        args = dict(self.model_args)
        try:
            if self.model_type == "ho1d":
                return HO1D(args["field"], args["n_max"])
            if self.model_type == "ho2d":
                return HO2D(args["field_x"], args["field_y"], args["n_max"])
            if self.model_type == "box":
                return ParticleBox(args["slope"], args["n_max"])
            if "file" in args:
                path = Path(args["file"])
                if not path.is_absolute() and self.base_dir is not None:
                    path = self.base_dir / path
                return HermitianMatrix.from_file(path)
            return HermitianMatrix.generator(args["d"])
        except KeyError as exc:
            raise ConfigError(f"model.{exc.args[0]} is required for model.type = {self.model_type}") from None
        except (ContractViolation, OSError) as exc:
            raise ConfigError(f"invalid model: {exc}") from None

    def with_seed(self, seed):
        return replace(self, seed=seed)


def from_flat(flat, base_dir=None, name="run"):
    """Build and validate an ExperimentConfig from a flat key dict."""
    model_type = flat.get("model.type")
    if model_type is None:
        raise ConfigError("model.type is required")
    if model_type not in MODEL_KEYS:
        raise ConfigError(f"model.type must be one of {sorted(MODEL_KEYS)}, got {model_type!r}")
    model_types = MODEL_KEYS[model_type]
    sampler_types = _dataclass_types(SamplerConfig)
    sr_types = _dataclass_types(SrConfig)

    model_args, network, sampler, sr, run = {}, {}, {}, {}, {}
    for key, value in flat.items():
        if key == "model.type":
            continue
        section, _, sub = key.partition(".")
        if section == "model" and sub in model_types:
            model_args[sub] = _convert(key, value, model_types[sub])
        elif section == "network" and sub in NETWORK_KEYS:
            network[sub] = _convert(key, value, NETWORK_KEYS[sub])
        elif section == "sampler" and sub in sampler_types and sub != "seed":
            sampler[sub] = _convert(key, value, sampler_types[sub])
        elif section == "sr" and sub in sr_types:
            sr[sub] = _convert(key, value, sr_types[sub])
        elif section == "run" and sub in RUN_KEYS:
            run[sub] = _convert(key, value, RUN_KEYS[sub])
        else:
            raise ConfigError(f"unknown key {key!r}")

    seed = run.get("seed", 0)
    try:
        activation = Activation(network.pop("activation", "gaussian"))
    except ValueError:
        raise ConfigError(f"unknown activation; choose from {[a.value for a in Activation]}") from None
    try:
        cfg = ExperimentConfig(
            model_type=model_type,
            model_args=model_args,
            activation=activation,
            sampler=SamplerConfig(seed=seed, **sampler),
            sr=SrConfig(**sr),
            seed=seed,
            restarts=run.get("restarts", 1),
            output=run.get("output"),
            name=run.get("name", name),
            base_dir=None if base_dir is None else Path(base_dir),
            **network,
        )
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    if cfg.M < 1:
        raise ConfigError("network.M must be >= 1")
    if not cfg.scale > 0:
        raise ConfigError("network.scale must be positive")
    if cfg.center_span is not None and cfg.center_span < 0:
        raise ConfigError("network.center_span must be >= 0")
    if cfg.restarts < 1:
        raise ConfigError("run.restarts must be >= 1")
    cfg.build_model()
    return cfg


def load_config(path):
    path = Path(path)
    return from_flat(read_flat(path), base_dir=path.parent, name=path.stem)
