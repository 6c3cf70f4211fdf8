"""Flat ``key = value`` experiment configuration and its content hash."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

SECTION = "experiment"
# keys that only say where results go
UNHASHED = {"output_dir"}

EXPERIMENTS = (
    "linear_layer",
    "main_theorem",
    "cascade_layers",
    "instability_scan",
    "grenier_convergence",
    "series_orders",
    "simulate",
)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


@dataclass
class ExperimentConfig:
    experiment: str = "simulate"
    eps: float = 1e-2
    k: float = 1.5
    n_dim: int = 2
    sigma: int = 1
    nonlinearity: str = "cubic"
    grid_points: int = 128
    grid_half_width: float = 6.5
    a0_amplitude: float = 1.0
    a0_width: float = 1.0
    formulation: str = "physical_u"
    dt: float | None = None
    t_end: float | None = None
    t_fixed: float = 0.75
    cascade_depth: int = 2
    limit_dt: float = 5e-3
    grenier_dt: float = 1e-2
    lifespan: float | None = None
    lifespan_cap: float = 3.0
    eps_list: list[float] = field(default_factory=list)
    t_list: list[float] = field(default_factory=list)
    lambda_list: list[float] = field(default_factory=list)
    hbar_list: list[float] = field(default_factory=list)
    output_dir: str | None = None
    threads: int = 1
    raw: dict[str, str] = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.eps_list and any(a <= b for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        if self.hbar_list and any(a <= b for a, b in zip(self.hbar_list, self.hbar_list[1:])):
            raise ValueError("hbar_list must be strictly decreasing")
        if self.lambda_list and any(a >= b for a, b in zip(self.lambda_list, self.lambda_list[1:])):
            raise ValueError("lambda_list must be strictly increasing")
        if not self.config_hash:
            self.config_hash = config_hash(self.raw)

    def get_float(self, key: str, default: float) -> float:
        return float(self.raw[key]) if key in self.raw else default

    def get_int(self, key: str, default: int) -> int:
        return int(self.raw[key]) if key in self.raw else default

    def get_list(self, key: str, default: list[float]) -> list[float]:
        return _floats(self.raw[key]) if key in self.raw else list(default)


# config key -> (attribute, converter)
_KEYS = {
    "experiment": ("experiment", str),
    "eps": ("eps", float),
    "k": ("k", float),
    "n_dim": ("n_dim", int),
    "sigma": ("sigma", int),
    "nonlinearity": ("nonlinearity", str),
    "grid.points": ("grid_points", int),
    "grid.half_width": ("grid_half_width", float),
    "a0.amplitude": ("a0_amplitude", float),
    "a0.width": ("a0_width", float),
    "formulation": ("formulation", str),
    "solver.dt": ("dt", float),
    "solver.t_end": ("t_end", float),
    "t_fixed": ("t_fixed", float),
    "cascade.N": ("cascade_depth", int),
    "limit.dt": ("limit_dt", float),
    "grenier.dt": ("grenier_dt", float),
    "lifespan": ("lifespan", float),
    "lifespan.cap": ("lifespan_cap", float),
    "eps_list": ("eps_list", _floats),
    "t_list": ("t_list", _floats),
    "lambda_list": ("lambda_list", _floats),
    "hbar_list": ("hbar_list", _floats),
    "output_dir": ("output_dir", str),
}


def config_hash(items: dict[str, str]) -> str:
    """sha256 of the sorted, whitespace-normalised key=value pairs (first 16 hex digits).

    Output locations are left out, so moving a run does not change its hash."""
    kept = {k.strip(): v for k, v in items.items() if k.strip() not in UNHASHED}
    text = "\n".join(f"{k}={' '.join(str(v).split())}" for k, v in sorted(kept.items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# desk-scale settings each experiment starts from; config files override them
DEFAULTS: dict[str, dict[str, str]] = {
    "linear_layer": {
        "n_dim": "1", "grid.points": "1024", "grid.half_width": "12",
        "eps_list": "1e-2, 1e-3, 1e-4", "t_list": "0.8, 0.9, 0.95, 0.975",
    },
    "main_theorem": {
        "grid.points": "256", "grid.half_width": "8",
        "eps_list": "1e-2, 3e-3", "lambda_list": "2, 4, 8, 16",
    },
    "cascade_layers": {"eps_list": "1e-2, 1e-3, 1e-4"},
    "instability_scan": {
        "grid.points": "256", "grid.half_width": "8", "eps_list": "1e-2, 3e-3, 1e-3", "cascade.N": "2",
    },
    "grenier_convergence": {"hbar_list": "0.2, 0.1, 0.05"},
    "series_orders": {"t_list": "0.02, 0.04, 0.08, 0.16"},
    # narrow profile: the |x|/eps chirp of the physical frame is resolved on 256^2
    "simulate": {
        "eps": "3e-3", "grid.points": "256", "grid.half_width": "0.9", "a0.width": "0.12",
    },
}


def _read(text: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keep key case ("cascade.N")
    cp.read_string(f"[{SECTION}]\n{text}")
    return dict(cp[SECTION])


def parse_text(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    given = _read(text)
    given.update(overrides or {})
    name = given.get("experiment", "simulate").strip()
    raw = {"experiment": name, **DEFAULTS.get(name, {}), **given}
    kwargs = {}
    for key, value in raw.items():
        if key in _KEYS:
            attr, conv = _KEYS[key]
            kwargs[attr] = conv(value)
    return ExperimentConfig(**kwargs, raw=raw)


def load(path: str | Path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    return parse_text(Path(path).read_text(), overrides)


def from_items(**items) -> ExperimentConfig:
    """Build a config from keyword items, using '__' for dots (grid__points=256)."""
    lines = "\n".join(f"{k.replace('__', '.')} = {v if not isinstance(v, (list, tuple)) else ', '.join(map(str, v))}"
                      for k, v in items.items())
    return parse_text(lines)
