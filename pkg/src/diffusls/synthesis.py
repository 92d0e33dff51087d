"""Per-mode H2-optimal closed-loop maps, computed two independent ways.

For mode ``kappa`` the achievable closed loops ``(phi_psi, phi_u)`` from the
state disturbance to state and input are exactly the stable strictly proper
pairs with ``(s + alpha kappa^2) phi_psi - phi_u = 1``. They are written as

    phi_psi = (1 + rho) / (s + 1)
    phi_u   = rho + (alpha kappa^2 - 1) phi_psi

for a free ``rho`` in RH2, and the H2 cost ``||[gamma phi_psi; phi_u]||``
becomes the model-matching problem ``min ||H + V rho||``.

* :func:`solve_mode_projection` solves it generically: spectral factor of
  ``V~V``, inner/outer split, stable projection of ``U_i~ H``.
* :func:`solve_mode_closed_form` writes the answer down directly.
* :func:`riccati_gain` is the scalar LQR oracle both are compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import polygamma

from . import ratfun
from ._parallel import map_modes
from .plant import ModeParams, PlantParams
from .ratfun import RationalTF, TFVector

IDENTITY_TOL = 1e-10
CROSS_PIPELINE_TOL = 1e-9


class UnstableRho(ValueError):
    pass


class NonConstantGain(ArithmeticError):
    pass


@dataclass(frozen=True)
class SynthesisResult:
    """Optimal closed loop of one mode.

    ``h2_cost_mode`` is the squared H2 norm ``gamma^2 ||phi_psi||^2 +
    ||phi_u||^2`` of the stacked output, which equals ``f_hat`` at the
    optimum.
    """

    mode: ModeParams
    rho_opt: RationalTF
    phi_psi: RationalTF
    phi_u: RationalTF
    k_hat: RationalTF
    f_hat: float
    affine_residual: float
    h2_cost_mode: float
    method: str

    def to_dict(self) -> dict:
        return {
            "kappa": self.mode.kappa,
            "alpha": self.mode.alpha,
            "gamma": self.mode.gamma,
            "method": self.method,
            "rho_opt": self.rho_opt.to_dict(),
            "phi_psi": self.phi_psi.to_dict(),
            "phi_u": self.phi_u.to_dict(),
            "k_hat": self.k_hat.to_dict(),
            "f_hat": self.f_hat,
            "affine_residual": self.affine_residual,
            "h2_cost_mode": self.h2_cost_mode,
        }


@dataclass(frozen=True)
class InnerOuterFactors:
    u_inner: TFVector
    u_outer: RationalTF


@dataclass(frozen=True)
class CostSummary:
    total: float
    tail_bound: float
    kmax: int


def _omega(omega_grid):
    return ratfun.DEFAULT_OMEGA_GRID if omega_grid is None else np.asarray(omega_grid, dtype=float)


def affine_residual(mode: ModeParams, phi_psi: RationalTF, phi_u: RationalTF, omega_grid=None) -> float:
    """``max |(s + alpha kappa^2) phi_psi - phi_u - 1|`` over ``s = j omega``."""
    s = 1j * _omega(omega_grid)
    r = (s + mode.diffusion_rate) * phi_psi(s) - phi_u(s) - 1.0
    return float(np.max(np.abs(r)))


def explicit_parameterization(mode: ModeParams, rho: RationalTF):
    """Closed-loop pair generated by a free parameter ``rho`` in RH2.

    ``phi_u`` is assembled as ``rho + (alpha kappa^2 - 1) phi_psi``, which is
    the same function as ``((alpha kappa^2 - 1) + (s + alpha kappa^2) rho) /
    (s + 1)`` but avoids cancelling two large numbers when ``alpha kappa^2``
    is big.
    """
    if not rho.is_zero and (not rho.is_strictly_proper or not rho.is_stable()):
        raise UnstableRho(f"rho must be stable and strictly proper, got {rho!r}")
    phi_psi = (1.0 + rho) * RationalTF([1.0], [1.0, 1.0])
    phi_u = rho + (mode.diffusion_rate - 1.0) * phi_psi
    return phi_psi, phi_u


@lru_cache(maxsize=8192)  # results are immutable
def model_matching_data(mode: ModeParams):
    """``H`` and ``V`` of ``min ||H + V rho||_2``."""
    g, d = mode.gamma, mode.diffusion_rate
    den = [1.0, 1.0]
    H = TFVector([RationalTF([g], den), RationalTF([d - 1.0], den)])
    V = TFVector([RationalTF([g], den), RationalTF([d, 1.0], den)])
    return H, V


def _spectral_factor(V: TFVector) -> RationalTF:
    """Outer ``U_o`` with ``U_o~ U_o = V~ V`` (minimum phase, positive at infinity)."""
    gram = V.para_conjugate().dot(V)
    # gram = N(s)/D(s) with N, D even; keep the left-half-plane roots of each
    def lhp(p):
        r = p.roots()
        return r[r.real < 0]
    zn, zd = lhp(gram.num), lhp(gram.den)
    num = np.real(np.polynomial.polynomial.polyfromroots(zn)) if len(zn) else np.array([1.0])
    den = np.real(np.polynomial.polynomial.polyfromroots(zd)) if len(zd) else np.array([1.0])
    # match the gain: gram(s) at s=0 equals |U_o(0)|^2
    base = RationalTF(num, den)
    scale = math.sqrt(float(np.real(gram(0.0))) / abs(base(0.0)) ** 2)
    return base * scale


def _same_poly(p, q, tol=1e-12) -> bool:
    a = p.coeffs / p.coeffs[-1]
    b = q.coeffs / q.coeffs[-1]
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(b))))


def inner_outer(mode: ModeParams) -> InnerOuterFactors:
    """Inner/outer split ``V = U_i U_o``.

    The outer factor comes from a spectral factorization of ``V~V``; for this
    plant it is ``(s + a) / (s + 1)`` with ``a = sqrt(gamma^2 + alpha^2
    kappa^4)``, and ``U_i = [gamma; s + alpha kappa^2] / (s + a)``.
    """
    _, V = model_matching_data(mode)
    u_outer = _spectral_factor(V)
    # V and U_o share the denominator, so U_i = N_v / N_o. Building it that
    # way skips the cancellation pass, which would otherwise merge the
    # nearly coincident s + alpha kappa^2 and s + a at large kappa.
    inv_outer = u_outer.inv()

    def divide(v):
        if _same_poly(u_outer.den, v.den):
            n_o = u_outer.num.coeffs * (v.den.coeffs[-1] / u_outer.den.coeffs[-1])
            return RationalTF(v.num, n_o, reduce=False)
        return v * inv_outer

    u_inner = TFVector([divide(v) for v in V])
    return InnerOuterFactors(u_inner=u_inner, u_outer=u_outer)


def inner_check(factors: InnerOuterFactors, omega_grid=None) -> float:
    """``max | |U_i(j omega)|^2 - 1 |`` over the grid."""
    s = 1j * _omega(omega_grid)
    vals = factors.u_inner(s)
    return float(np.max(np.abs(np.sum(np.abs(vals) ** 2, axis=0) - 1.0)))


def riccati_gain(mode: ModeParams):
    """Positive root of ``-2 alpha kappa^2 F - F^2 + gamma^2 = 0`` and ``K = -F``.

    Written as ``gamma^2 / (alpha kappa^2 + a)`` so it keeps full relative
    accuracy when ``alpha kappa^2 >> gamma``.
    """
    f_hat = mode.gamma ** 2 / (mode.diffusion_rate + mode.decay_rate)
    return f_hat, -f_hat


def are_residual(mode: ModeParams, f_hat: float) -> float:
    return abs(-2.0 * mode.diffusion_rate * f_hat - f_hat * f_hat + mode.gamma ** 2)


def _stacked(mode, phi_psi, phi_u) -> TFVector:
    return TFVector([phi_psi * mode.gamma, phi_u])


def _finish(mode, rho, phi_psi, phi_u, method, omega_grid=None) -> SynthesisResult:
    f_hat, _ = riccati_gain(mode)
    k_hat = phi_u / phi_psi
    return SynthesisResult(
        mode=mode,
        rho_opt=rho,
        phi_psi=phi_psi,
        phi_u=phi_u,
        k_hat=k_hat,
        f_hat=f_hat,
        affine_residual=affine_residual(mode, phi_psi, phi_u, omega_grid),
        h2_cost_mode=ratfun.h2_norm(_stacked(mode, phi_psi, phi_u)) ** 2,
        method=method,
    )


def solve_mode_projection(mode: ModeParams, omega_grid=None) -> SynthesisResult:
    """Optimal mode via inner/outer factorization and RH2 projection.

    ``rho_opt = -U_o^{-1} P(U_i~ H)`` with ``P`` the stable projection.
    """
    H, _ = model_matching_data(mode)
    factors = inner_outer(mode)
    proj = ratfun.stable_projection(factors.u_inner.para_conjugate().dot(H))
    rho = -(factors.u_outer.inv() * proj)
    phi_psi, phi_u = explicit_parameterization(mode, rho)
    return _finish(mode, rho, phi_psi, phi_u, "projection", omega_grid)


def solve_mode_closed_form(mode: ModeParams, omega_grid=None) -> SynthesisResult:
    """Optimal mode from the explicit formulas.

    ``phi_psi = 1/(s+a)``, ``phi_u = (alpha kappa^2 - a)/(s+a)``,
    ``rho = (1-a)/(s+a)``.
    """
    a = mode.decay_rate
    f_hat, k = riccati_gain(mode)
    den = [a, 1.0]
    rho = RationalTF([1.0 - a], den)
    phi_psi = RationalTF([1.0], den)
    phi_u = RationalTF([k], den)
    return _finish(mode, rho, phi_psi, phi_u, "closed_form", omega_grid)


_SOLVERS = {"projection": solve_mode_projection, "closed_form": solve_mode_closed_form}


def solve_mode(mode: ModeParams, method: str = "projection", omega_grid=None) -> SynthesisResult:
    try:
        solver = _SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(_SOLVERS)}") from None
    return solver(mode, omega_grid)


def gain_equivalence_check(result: SynthesisResult) -> float:
    """``|phi_u / phi_psi - (-F)|``; the ratio must reduce to a constant."""
    ratio = result.phi_u / result.phi_psi
    if not ratio.is_constant:
        raise NonConstantGain(f"phi_u/phi_psi = {ratio!r} depends on s")
    k = ratio.limit_at_infinity()
    return abs(k + result.f_hat)


def total_h2_cost(results) -> CostSummary:
    """``sum_{|kappa| <= kmax} F_kappa`` from results for ``kappa = 0..kmax``.

    Each ``kappa > 0`` counts twice (``+kappa`` and ``-kappa``). The tail bound
    uses ``F_kappa <= gamma^2 / (2 alpha kappa^2)``, summed in closed form
    with the trigamma function.
    """
    results = list(results)
    if not results:
        raise ValueError("no modes given")
    total = 0.0
    for r in results:
        total += r.f_hat if r.mode.kappa == 0 else 2.0 * r.f_hat
    kmax = max(abs(r.mode.kappa) for r in results)
    plant = results[0].mode.plant
    tail = plant.gamma ** 2 / plant.alpha * float(polygamma(1, kmax + 1))
    return CostSummary(total=total, tail_bound=tail, kmax=kmax)


def synthesize(plant: PlantParams, kmax: int, method: str = "projection", omega_grid=None, threads=None):
    """Solve ``kappa = 0..kmax``; results are ordered by ``kappa``."""
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    modes = [ModeParams(plant, k) for k in range(kmax + 1)]
    return map_modes(lambda m: solve_mode(m, method, omega_grid), modes, threads)
