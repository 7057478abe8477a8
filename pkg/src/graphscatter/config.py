"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError


class Experiment(enum.Enum):
    STABILITY_SWEEP = "stability_sweep"
    SOURCE_LOCALIZATION = "source_localization"
    AUTHORSHIP = "authorship"
    BOUND_CHECK = "bound_check"
    DUMP_KERNELS = "dump_kernels"
    WAN_BUILD = "wan_build"


@dataclass(frozen=True)
class SweepRange:
    lo: float
    hi: float
    points: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.points < 1:
            raise ConfigError("sweep range needs at least one point")
        if self.spacing not in ("linear", "log"):
            raise ConfigError(f"unknown spacing {self.spacing!r}")
        if self.spacing == "log" and self.lo <= 0:
            raise ConfigError("log spacing requires lo > 0")
        if self.hi < self.lo:
            raise ConfigError("sweep range has hi < lo")

    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.lo])
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)

    @classmethod
    def parse(cls, text: str) -> SweepRange:
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (3, 4):
            raise ConfigError(f"range must be 'lo, hi, points[, spacing]', got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]), *(parts[3:]))
        except ValueError as exc:
            raise ConfigError(f"bad range {text!r}: {exc}") from None

    def __str__(self):
        return f"{self.lo!r}, {self.hi!r}, {self.points}, {self.spacing}"


@dataclass
class ExperimentConfig:
    experiment: Experiment = Experiment.STABILITY_SWEEP
    families: tuple = ("monic_cubic", "tight_hann", "diffusion", "gft")
    J: int = 6
    L: int = 3
    aggregator: str = "mean"
    n_nodes: int = 100
    p_edge: float = 0.5
    q_rewire: float = 0.1
    p_in: float = 0.2
    p_out: float = 0.02
    n_graphs: int = 10
    n_perturbations: int = 10
    n_signals: int = 1000
    n_trials: int = 20
    eps_range: SweepRange = field(default_factory=lambda: SweepRange(0.1, 1.0, 10, "linear"))
    p_range: SweepRange = field(default_factory=lambda: SweepRange(0.01, 0.3, 10, "log"))
    split_range: SweepRange = field(default_factory=lambda: SweepRange(0.2, 0.9, 10, "linear"))
    include_sanity: bool = False
    seed: int = 0
    gft_coeff_count: int = 43
    gft_band: str = "band_pass"
    t_max: int = 20
    n_train: int = 1000
    n_test: int = 200
    reg_lambda: float = 0.0
    epochs: int = 100
    bound_slack: float = 0.5
    mc_trials: int = 0
    corpus_dir: str = ""
    word_list: str = ""
    window: int = 10
    decay: float = 0.8
    excerpt_length: int = 1000
    graph_file: str = ""
    kernel_grid: int = 1000
    output_dir: str = "out"

    def __post_init__(self):
        if self.J < 1 or self.L < 1:
            raise ConfigError("J and L must be at least 1")
        if self.gft_band not in ("low_pass", "band_pass"):
            raise ConfigError(f"gft_band must be low_pass or band_pass, got {self.gft_band!r}")
        if self.aggregator not in ("mean", "degree_weighted"):
            raise ConfigError(f"aggregator must be mean or degree_weighted, got {self.aggregator!r}")
        known = {"monic_cubic", "tight_hann", "diffusion", "gft"}
        bad = [f for f in self.families if f not in known]
        if bad or not self.families:
            raise ConfigError(f"unknown families {bad}")
        for name in ("n_graphs", "n_perturbations", "n_signals", "n_trials", "n_train", "n_test", "t_max", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")

    @property
    def gst_families(self) -> list[str]:
        return [f for f in self.families if f != "gft"]


def _convert(name: str, ftype, text: str):
    try:
        if ftype is Experiment or ftype == "Experiment":
            return Experiment(text.replace("-", "_"))
        if ftype == "SweepRange":
            return SweepRange.parse(text)
        if ftype == "tuple":
            return tuple(p.strip() for p in text.split(",") if p.strip())
        if ftype == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {text!r}")
            return low in ("true", "1", "yes")
        if ftype == "int":
            return int(text)
        if ftype == "float":
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, _FIELDS[key].type, value)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, **overrides)
