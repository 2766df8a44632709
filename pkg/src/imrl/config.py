"""Flat key=value run configuration with validated defaults.

Every tunable constant left open by the method (margin alpha, loss
weights, density radius and margin, history length, frame count) is
user-visible here, and all randomness derives from the single root seed.
"""
import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    seed: int = 0
    margin_alpha: float = 0.2
    lambda_ce: float = 1.0
    lambda_tri: float = 1.0
    lambda_temp: float = 1.0
    lambda_full: float = 1.0
    density_radius: int = 9
    safety_margin: float = 3.0
    history_k: int = 4
    n_frames: int = 4
    repr_epochs: int = 20
    bc_epochs: int = 400
    per_class: int = 200
    n_demos: int = 30
    n_eval: int = 50
    horizon: int = 40
    input_noise: float = 0.05
    lr: float = 1e-3
    out_dir: str = "runs"
    data_dir: str = "data"

    def hash(self):
        """Stable digest of the full key=value content."""
        text = "\n".join(
            f"{f.name}={getattr(self, f.name)}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_RANGES = {
    "seed": (0, 2**31 - 1),
    "margin_alpha": (0.0, 10.0),
    "lambda_ce": (0.0, 100.0),
    "lambda_tri": (0.0, 100.0),
    "lambda_temp": (0.0, 100.0),
    "lambda_full": (0.0, 100.0),
    "density_radius": (1, 31),
    "safety_margin": (0.0, 31.0),
    "history_k": (1, 16),
    "n_frames": (2, 16),
    "repr_epochs": (0, 10000),
    "bc_epochs": (0, 100000),
    "per_class": (4, 100000),
    "n_demos": (1, 10000),
    "n_eval": (1, 10000),
    "horizon": (1, 1000),
    "input_noise": (0.0, 1.0),
    "lr": (1e-8, 1.0),
}


def parse_config(path):
    """Load a key=value file into a RunConfig; omitted keys keep defaults.

    Blank lines and '#' comments are ignored. Unknown keys and values
    outside their documented ranges raise ConfigError naming the key.
    """
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    cfg = RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    casts = {int: int, float: float, str: str,
             "int": int, "float": float, "str": str}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {text!r}")
        key, _, value = text.partition("=")
        key, value = key.strip(), value.strip()
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        cast = casts[types[key]]
        try:
            parsed = cast(value)
        except ValueError as e:
            raise ConfigError(
                f"{path}:{lineno}: bad value for {key}: {value!r}") from e
        if key in _RANGES:
            lo, hi = _RANGES[key]
            if not (lo <= parsed <= hi):
                raise ConfigError(
                    f"{path}:{lineno}: {key}={parsed} outside [{lo}, {hi}]")
        setattr(cfg, key, parsed)
    return cfg
