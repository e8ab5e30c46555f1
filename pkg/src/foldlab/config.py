"""Experiment configuration: one JSON document, validated, unknown keys rejected."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from foldlab.errors import ConfigError, ModelError
from foldlab.models import FrictionParams
from foldlab.regfn import REGFN_IDS

TOL_RANGE = (1e-13, 1e-6)
MODELS = ("normal_form", "friction")
FIELDS = ("regularized", "z_plus", "z_minus")

DEFAULT_EPS = [1e-4, 2.5e-4, 5e-4, 1e-3, 2.5e-3, 5e-3]


@dataclass
class ExperimentConfig:
    model: str = "friction"
    friction: dict = dataclasses.field(default_factory=lambda: dataclasses.asdict(FrictionParams()))
    regfn: str = "smooth_sqrt"
    eps: float = 5e-3
    eps_list: list = dataclasses.field(default_factory=lambda: list(DEFAULT_EPS))
    alpha: float = 0.22
    alpha_window: Optional[list] = None
    field: str = "regularized"
    delta: float = 0.04
    xi: float = 1.0
    tol: float = 1e-10
    t_max: float = 200.0
    dt: float = 0.01
    z0: Optional[list] = None
    x_grid: list = dataclasses.field(default_factory=lambda: [-0.3, -0.1, 21])
    chi: float = 8.0
    theta: float = 0.05
    chini_k: list = dataclasses.field(default_factory=lambda: [1, 2, 3])
    chini_c: list = dataclasses.field(default_factory=lambda: [1.0, 2.0])
    chini_n: int = 200
    chart_samples: int = 100
    seed: int = 0
    figures: bool = True
    out: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.regfn not in REGFN_IDS:
            raise ConfigError(f"regfn must be one of {REGFN_IDS}, got {self.regfn!r}")
        if self.field not in FIELDS:
            raise ConfigError(f"field must be one of {FIELDS}, got {self.field!r}")
        try:
            self.friction_params()
        except (TypeError, ModelError) as exc:
            raise ConfigError(f"friction: {exc}") from None
        lo, hi = TOL_RANGE
        if not (_num(self.tol) and lo <= self.tol <= hi):
            raise ConfigError(f"tol must lie in [{lo:g}, {hi:g}], got {self.tol!r}")
        if not (_num(self.eps) and self.eps >= 0):
            raise ConfigError(f"eps must be >= 0, got {self.eps!r}")
        if not isinstance(self.eps_list, list) or not self.eps_list:
            raise ConfigError("eps_list must be a non-empty list")
        if not all(_num(e) and e > 0 for e in self.eps_list):
            raise ConfigError(f"eps_list entries must be positive, got {self.eps_list!r}")
        for name in ("delta", "xi", "t_max", "dt", "chi", "theta"):
            v = getattr(self, name)
            if not (_num(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if not self.delta < self.xi:
            raise ConfigError("delta must be smaller than xi")
        if not _num(self.alpha):
            raise ConfigError(f"alpha must be a number, got {self.alpha!r}")
        if self.alpha_window is not None and not _pair(self.alpha_window, ordered=True):
            raise ConfigError(f"alpha_window must be [lo, hi] with lo < hi, got {self.alpha_window!r}")
        if self.z0 is not None and not _pair(self.z0):
            raise ConfigError(f"z0 must be [x, y], got {self.z0!r}")
        g = self.x_grid
        if not (isinstance(g, list) and len(g) == 3 and _num(g[0]) and _num(g[1]) and _int(g[2]) and g[2] >= 1):
            raise ConfigError(f"x_grid must be [lo, hi, n], got {g!r}")
        if not (isinstance(self.chini_k, list) and self.chini_k and all(_int(k) and k >= 1 for k in self.chini_k)):
            raise ConfigError(f"chini_k must list positive integers, got {self.chini_k!r}")
        if not (isinstance(self.chini_c, list) and self.chini_c and all(_num(c) and c > 0 for c in self.chini_c)):
            raise ConfigError(f"chini_c must list positive numbers, got {self.chini_c!r}")
        for name in ("chini_n", "chart_samples"):
            v = getattr(self, name)
            if not (_int(v) and v >= 2):
                raise ConfigError(f"{name} must be an integer >= 2, got {v!r}")
        if not _int(self.seed):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if not isinstance(self.figures, bool):
            raise ConfigError("figures must be true or false")
        if not isinstance(self.out, str) or not self.out:
            raise ConfigError("out must be a non-empty path")

    def friction_params(self) -> FrictionParams:
        if not isinstance(self.friction, dict):
            raise ConfigError("friction must be an object")
        known = {f.name for f in dataclasses.fields(FrictionParams)}
        extra = set(self.friction) - known
        if extra:
            raise ConfigError(f"unknown friction keys: {sorted(extra)}")
        return FrictionParams(**self.friction)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _pair(v, ordered: bool = False) -> bool:
    ok = isinstance(v, list) and len(v) == 2 and all(_num(u) for u in v)
    return ok and (not ordered or v[0] < v[1])


def from_dict(data: Any) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"unknown config keys: {extra}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return from_dict(data)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)
