"""H2-optimal closed loops for diffusion on the unit circle.

Per-mode synthesis (projection pipeline and closed forms), the LQR/Riccati
oracle, a dynamic controller implementation with its closed-loop table,
fixed-step simulation, and physical-space kernel reconstruction.
"""

from . import implementation, kernels, plant, ratfun, simulator, synthesis
from ._kernels import BACKEND
from .plant import ModeParams, PlantParams
from .ratfun import Polynomial, RationalTF, TFVector

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ModeParams",
    "PlantParams",
    "Polynomial",
    "RationalTF",
    "TFVector",
    "implementation",
    "kernels",
    "plant",
    "ratfun",
    "simulator",
    "synthesis",
]
