"""Diffusion on the unit circle, one spatial-frequency mode at a time.

With Fourier modes ``e^{j kappa theta}`` the generator ``alpha d^2/dtheta^2``
acts on mode ``kappa`` as multiplication by ``-alpha kappa^2``. Everything
depends on ``kappa`` only through ``kappa^2``, so callers solve
``kappa = 0..kmax`` and mirror.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ratfun import RationalTF, TFVector


class NegativeTime(ValueError):
    pass


@dataclass(frozen=True)
class PlantParams:
    """Diffusivity ``alpha`` and state-penalty weight ``gamma``, both > 0."""

    alpha: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "gamma"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or isinstance(v, bool):
                raise TypeError(f"{name} must be a real number")
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class ModeParams:
    plant: PlantParams
    kappa: int

    def __post_init__(self):
        k = self.kappa
        if isinstance(k, bool) or int(k) != k:
            raise ValueError(f"kappa must be an integer, got {k!r}")
        object.__setattr__(self, "kappa", int(k))

    @property
    def alpha(self) -> float:
        return self.plant.alpha

    @property
    def gamma(self) -> float:
        return self.plant.gamma

    @property
    def diffusion_rate(self) -> float:
        """``alpha kappa^2``, the open-loop decay rate of the mode."""
        return self.plant.alpha * self.kappa * self.kappa

    @property
    def decay_rate(self) -> float:
        """``sqrt(gamma^2 + alpha^2 kappa^4)``, the optimal closed-loop pole magnitude."""
        return math.hypot(self.plant.gamma, self.diffusion_rate)

    def mirrored(self) -> "ModeParams":
        return ModeParams(self.plant, -self.kappa)


@dataclass(frozen=True)
class OutputOperators:
    """Regulated output ``z = C psi + D u`` with ``C = [gamma; 0]``, ``D = [0; 1]``."""

    gamma: float

    @property
    def C_hat(self) -> np.ndarray:
        return np.array([self.gamma, 0.0])

    @property
    def D_hat(self) -> np.ndarray:
        return np.array([0.0, 1.0])


def a_hat(mode: ModeParams) -> float:
    """Generator symbol ``-alpha kappa^2``."""
    return -mode.diffusion_rate


def plant_tf(mode: ModeParams) -> TFVector:
    """Input-to-output map ``[gamma / (s + alpha kappa^2); 1]``."""
    return TFVector([
        RationalTF([mode.gamma], [mode.diffusion_rate, 1.0]),
        RationalTF.constant(1.0),
    ])


def semigroup_symbol(mode: ModeParams, t: float) -> float:
    """Open-loop evolution ``exp(-alpha kappa^2 t)`` of one mode."""
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    return math.exp(-mode.diffusion_rate * t)
