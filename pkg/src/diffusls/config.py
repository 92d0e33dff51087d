"""Run configuration: JSON file, defaults, and CLI overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np


class ConfigError(ValueError):
    pass


def _default_omega():
    return {"min": 1e-4, "max": 1e6, "points": 2048}


def _default_tolerances():
    return {"identity": 1e-10, "cross_pipeline": 1e-9, "quadrature": 5e-3}


@dataclass
class Config:
    alpha: float = 1.0
    gamma: float = 1.0
    kmax: int = 64
    grid_n: int = 1024
    t_final: float | None = None  # None: 20 / gamma
    dt: float | None = None  # None: 0.1 / (fastest pole) per mode
    omega_grid: dict = field(default_factory=_default_omega)
    tolerances: dict = field(default_factory=_default_tolerances)
    output_dir: str = "out"
    method: str = "projection"
    sim_kmax: int = 16
    kernel_t_points: int = 200
    kernel_t_final: float | None = None  # None: 5 / gamma
    stability_margin: float = 1e-9

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------------
    def validate(self):
        def positive(name, v, allow_none=False):
            if v is None and allow_none:
                return
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be a positive number, got {v!r}")

        def integer(name, v, lo):
            if isinstance(v, bool) or not isinstance(v, int) or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")

        positive("alpha", self.alpha)
        positive("gamma", self.gamma)
        integer("kmax", self.kmax, 0)
        integer("grid_n", self.grid_n, 2)
        if self.grid_n & (self.grid_n - 1):
            raise ConfigError(f"grid_n must be a power of two, got {self.grid_n}")
        positive("t_final", self.t_final, allow_none=True)
        positive("dt", self.dt, allow_none=True)
        positive("kernel_t_final", self.kernel_t_final, allow_none=True)
        positive("stability_margin", self.stability_margin)
        integer("sim_kmax", self.sim_kmax, 0)
        integer("kernel_t_points", self.kernel_t_points, 2)
        if self.method not in ("projection", "closed_form"):
            raise ConfigError(f"method must be 'projection' or 'closed_form', got {self.method!r}")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigError("output_dir must be a non-empty string")

        og = self.omega_grid
        if not isinstance(og, dict) or set(og) != {"min", "max", "points"}:
            raise ConfigError("omega_grid must be an object with keys min, max, points")
        positive("omega_grid.min", og["min"])
        positive("omega_grid.max", og["max"])
        integer("omega_grid.points", og["points"], 1)
        if og["max"] <= og["min"]:
            raise ConfigError("omega_grid.max must exceed omega_grid.min")

        tol = self.tolerances
        if not isinstance(tol, dict) or set(tol) != {"identity", "cross_pipeline", "quadrature"}:
            raise ConfigError("tolerances must be an object with keys identity, cross_pipeline, quadrature")
        for k, v in tol.items():
            positive(f"tolerances.{k}", v)

    # ------------------------------------------------------------------
    @property
    def effective_t_final(self) -> float:
        return 20.0 / self.gamma if self.t_final is None else float(self.t_final)

    @property
    def effective_kernel_t_final(self) -> float:
        return 5.0 / self.gamma if self.kernel_t_final is None else float(self.kernel_t_final)

    def omega(self) -> np.ndarray:
        og = self.omega_grid
        return np.concatenate(([0.0], np.logspace(math.log10(og["min"]), math.log10(og["max"]), og["points"])))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        base = cls()
        merged = base.to_dict()
        for k, v in d.items():
            if k in ("omega_grid", "tolerances") and isinstance(v, dict):
                merged[k] = {**merged[k], **v}
            else:
                merged[k] = v
        # JSON has one number type; accept 3.0 where an int is expected
        for k in ("kmax", "grid_n", "sim_kmax", "kernel_t_points"):
            if isinstance(merged[k], float) and merged[k].is_integer():
                merged[k] = int(merged[k])
        og = merged["omega_grid"]
        if isinstance(og, dict) and isinstance(og.get("points"), float) and og["points"].is_integer():
            og["points"] = int(og["points"])
        return cls(**merged)


def parse_json_text(text: str, source: str = "<config>") -> dict:
    """``json.loads`` with errors that quote the offending line."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        lines = text.splitlines() or [""]
        line = lines[min(e.lineno, len(lines)) - 1]
        caret = " " * (e.colno - 1) + "^"
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: {e.msg}\n    {line}\n    {caret}") from None


def load_config(path=None, overrides=None) -> Config:
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        data = parse_json_text(text, str(path))
    data = dict(data) if isinstance(data, dict) else data
    if overrides:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
    return Config.from_dict(data)


def dumps(obj) -> str:
    """Canonical JSON used for every output file."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
