"""Physical-space kernels on the circle from per-mode symbols.

Fourier convention (used everywhere in this module): the forward transform
carries the ``1/2pi``,

    K_kappa = (1/2pi) int k(theta) e^{-j kappa theta} dtheta,

and synthesis is the plain sum ``k(theta) = sum_kappa K_kappa e^{j kappa
theta}``. All symbols here are real and even in ``kappa``, so synthesis
reduces to ``K_0 + 2 sum_{kappa >= 1} K_kappa cos(kappa theta)``. Under this
convention the mean of ``k`` is ``K_0``, ``(1/2pi) int k^2 = sum K_kappa^2``,
and convolving ``k`` with ``cos(m theta)`` gives ``2pi K_m cos(m theta)``.

The grid is ``theta_i = -pi + 2pi i / n``, ``i = 0..n-1``; ``theta_0 = -pi``
and ``theta_{n/2} = 0``.

Every kernel carries an estimate of the synthesis tail ``sum_{|kappa| > kmax}
|K_kappa|`` so truncation is never silent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import polygamma

from . import _kernels
from .plant import ModeParams, PlantParams
from .ratfun import RationalTF
from .simulator import realize
from .synthesis import riccati_gain

CONVENTION = "K_kappa = (1/2pi) int k(theta) exp(-j kappa theta) dtheta; k(theta) = sum_kappa K_kappa exp(j kappa theta)"
DIRAC_TOL = 1e-8


class InvalidRadius(ValueError):
    pass


@dataclass(frozen=True)
class SpatialKernel:
    theta: np.ndarray
    values: np.ndarray
    coeffs: np.ndarray
    kmax: int
    tail_bound: float
    dirac_coeff: float = 0.0
    label: str = ""

    def mean(self) -> float:
        return float(np.mean(self.values))

    def to_csv(self) -> str:
        lines = ["theta,value"]
        lines += [f"{th!r},{v!r}" for th, v in zip(self.theta.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"

    def metadata(self) -> dict:
        return {
            "label": self.label,
            "kmax": self.kmax,
            "grid_n": len(self.theta),
            "tail_bound": self.tail_bound,
            "dirac_coeff": self.dirac_coeff,
            "convention": CONVENTION,
        }


@dataclass(frozen=True)
class SpatioTemporalKernel:
    t: np.ndarray
    theta: np.ndarray
    values: np.ndarray  # shape (len(t), len(theta))
    coeffs: np.ndarray  # shape (len(t), kmax + 1)
    kmax: int
    tail_bound: np.ndarray  # per time slice
    label: str = ""

    def slice_norms(self) -> np.ndarray:
        """``||f(t, .)||_{L2}`` per slice, periodic trapezoid rule."""
        h = 2.0 * math.pi / len(self.theta)
        return np.sqrt(h * np.sum(self.values ** 2, axis=1))

    def to_csv(self) -> str:
        lines = ["t,theta,value"]
        th = self.theta.tolist()
        for ti, row in zip(self.t.tolist(), self.values.tolist()):
            lines += [f"{ti!r},{a!r},{b!r}" for a, b in zip(th, row)]
        return "\n".join(lines) + "\n"

    def metadata(self) -> dict:
        return {
            "label": self.label,
            "kmax": self.kmax,
            "grid_n": len(self.theta),
            "t_points": len(self.t),
            "tail_bound_max": float(np.max(self.tail_bound)) if len(self.tail_bound) else 0.0,
            "convention": CONVENTION,
        }


def theta_grid(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("grid needs at least two points")
    return -math.pi + 2.0 * math.pi * np.arange(n) / n


def _probe_modes(kmax: int):
    k = kmax + 1
    return [k, 2 * k, 4 * k]


def _tail_from_probes(kmax: int, probe_values) -> float:
    """``sum_{|kappa| > kmax} C / kappa^2`` with ``C`` fitted to probe magnitudes.

    Exact for symbols that decay like ``1/kappa^2`` from ``kmax + 1`` on and an
    overestimate for faster decay.
    """
    c = max(abs(v) * k * k for k, v in zip(_probe_modes(kmax), probe_values))
    return float(2.0 * c * polygamma(1, kmax + 1))


def _check_even(symbol_fn, kmax):
    for k in range(1, min(kmax, 8) + 1):
        a, b = symbol_fn(k), symbol_fn(-k)
        if abs(a - b) > 1e-12 * max(1.0, abs(a)):
            raise ValueError(f"symbol is not even in kappa at kappa={k}")


def inverse_fourier_static(symbol_fn, kmax: int, grid_n: int, tail_bound=None, label: str = "") -> SpatialKernel:
    """Synthesize ``sum_{|kappa| <= kmax} K_kappa e^{j kappa theta}`` on the grid.

    Parameters
    ----------
    symbol_fn : callable
        ``kappa -> K_kappa``, real and even in ``kappa``.
    tail_bound : float, optional
        Known bound on ``sum_{|kappa| > kmax} |K_kappa|``. Estimated from
        probe modes when omitted.
    """
    _check_even(symbol_fn, kmax)
    coeffs = np.array([float(symbol_fn(k)) for k in range(kmax + 1)])
    theta = theta_grid(grid_n)
    values = _kernels.cosine_synthesis(coeffs[None, :], theta)[0]
    if tail_bound is None:
        tail_bound = _tail_from_probes(kmax, [symbol_fn(k) for k in _probe_modes(kmax)])
    return SpatialKernel(theta, values, coeffs, kmax, float(tail_bound), 0.0, label)


def lqr_gain_kernel(plant: PlantParams, kmax: int, grid_n: int) -> SpatialKernel:
    """Static LQR gain kernel ``k(theta)`` with symbol ``-F_kappa``.

    The tail uses ``F_kappa <= gamma^2 / (2 alpha kappa^2)`` exactly.
    """
    tail = plant.gamma ** 2 / plant.alpha * float(polygamma(1, kmax + 1))
    return inverse_fourier_static(lambda k: riccati_gain(ModeParams(plant, k))[1], kmax, grid_n,
                                  tail_bound=tail, label="k")


def impulse_response(tf: RationalTF, t) -> np.ndarray:
    """``C e^{At} B`` for a stable strictly proper ``tf``, at times ``t >= 0``."""
    if tf.is_zero:
        return np.zeros_like(np.asarray(t, dtype=float))
    if not tf.is_strictly_proper:
        raise ValueError(f"{tf!r} has a feedthrough; take its strictly proper part first")
    if not tf.is_stable():
        raise ValueError(f"{tf!r} is unstable")
    ss = realize(tf)
    t = np.asarray(t, dtype=float)
    lam, V = np.linalg.eig(ss.A)
    if np.linalg.cond(V) < 1e8:
        left = ss.C @ V
        right = np.linalg.solve(V, ss.B)[:, 0]
        h = np.real(np.exp(np.outer(t, lam)) @ (left[0] * right))
    else:  # defective or nearly so
        h = np.array([(ss.C @ expm(ss.A * ti) @ ss.B)[0, 0] for ti in t])
    return h


def dynamic_kernel(tf_family, t_grid, kmax: int, grid_n: int, label: str = "") -> SpatioTemporalKernel:
    """Spatio-temporal Green's function of a family of strictly proper symbols.

    Each mode's impulse response is synthesized per time slice. The tail is
    estimated per slice from probe modes past ``kmax``.
    """
    t = np.asarray(t_grid, dtype=float)
    coeffs = np.empty((len(t), kmax + 1))
    for k in range(kmax + 1):
        coeffs[:, k] = impulse_response(tf_family(k), t)
    probes = np.array([impulse_response(tf_family(k), t) for k in _probe_modes(kmax)])
    tails = np.array([_tail_from_probes(kmax, probes[:, i]) for i in range(len(t))])
    theta = theta_grid(grid_n)
    values = _kernels.cosine_synthesis(coeffs, theta)
    return SpatioTemporalKernel(t, theta, values, coeffs, kmax, tails, label)


def static_part(tf_family, kmax: int, grid_n: int, label: str = "") -> SpatialKernel:
    """Kernel of the feedthrough symbols ``lim_{s -> inf} tf_kappa(s)``.

    ``values`` is the truncated synthesis of all feedthroughs. A feedthrough
    that tends to a nonzero constant ``c`` as ``|kappa| -> inf`` is a Dirac
    component ``c delta(theta)``; ``dirac_coeff`` records ``c`` and the
    sampled values are then only its Dirichlet surrogate. ``c`` is
    extrapolated from two probe modes assuming ``D_kappa = c + C/kappa^2 +
    ...``, and snapped to 0 below ``DIRAC_TOL``.
    """
    d = [tf_family(k).limit_at_infinity() for k in range(kmax + 1)]
    k1, k2 = 8 * (kmax + 1), 16 * (kmax + 1)
    d1, d2 = tf_family(k1).limit_at_infinity(), tf_family(k2).limit_at_infinity()
    c_inf = (d2 * k2 ** 2 - d1 * k1 ** 2) / (k2 ** 2 - k1 ** 2)
    dirac = 0.0 if abs(c_inf) < DIRAC_TOL else float(c_inf)
    probes = [tf_family(k).limit_at_infinity() - dirac for k in _probe_modes(kmax)]
    theta = theta_grid(grid_n)
    coeffs = np.array(d, dtype=float)
    values = _kernels.cosine_synthesis(coeffs[None, :], theta)[0]
    return SpatialKernel(theta, values, coeffs, kmax, _tail_from_probes(kmax, probes), dirac, label)


def strictly_proper_family(tf_family):
    return lambda k: tf_family(k).strictly_proper_part()


# ---------------------------------------------------------------------------
# identities and the truncation functional
# ---------------------------------------------------------------------------

def _rows(kernel):
    if isinstance(kernel, SpatioTemporalKernel):
        return kernel.values
    return kernel.values[None, :]


def evenness_defect(kernel) -> float:
    """``max |f(theta) - f(-theta)|`` over every slice."""
    v = _rows(kernel)
    n = v.shape[1]
    mirror = (n - np.arange(n)) % n
    return float(np.max(np.abs(v - v[:, mirror])))


def parseval_gap(kernel: SpatialKernel) -> float:
    """``|(1/2pi) int k^2 - sum_{|kappa|<=kmax} K_kappa^2|``."""
    lhs = float(np.mean(kernel.values ** 2))
    c = kernel.coeffs
    rhs = float(c[0] ** 2 + 2.0 * np.sum(c[1:] ** 2))
    return abs(lhs - rhs)


def convolve(kernel: SpatialKernel, profile) -> np.ndarray:
    """``int k(theta - xi) f(xi) dxi`` on the grid (periodic trapezoid, via FFT)."""
    f = np.asarray(profile, dtype=float)
    n = len(kernel.theta)
    if f.shape != (n,):
        raise ValueError("profile must be sampled on the kernel grid")
    # grid index of theta_i - theta_j is (i - j + n/2) mod n
    k0 = np.roll(kernel.values, -(n // 2))  # k0[m] = k(2pi m / n)
    h = 2.0 * math.pi / n
    return h * np.real(np.fft.ifft(np.fft.fft(k0) * np.fft.fft(f)))


def _check_radius(r):
    if not (0.0 < r <= math.pi) or not math.isfinite(r):
        raise InvalidRadius(f"radius must lie in (0, pi], got {r!r}")


def truncation_error(kernel, r: float) -> np.ndarray:
    """L2 norm of each slice over ``|theta| >= r``.

    The squared kernel is integrated exactly as a piecewise-linear function
    of ``theta`` on ``[-pi, pi]`` (periodically closed), so the result is 0
    at ``r = pi``, tends to the full slice norm as ``r -> 0`` and is
    nonincreasing in ``r``. One value per slice; a static kernel gives a
    length-1 array.
    """
    _check_radius(r)
    sq = _rows(kernel) ** 2
    sq = np.concatenate([sq, sq[:, :1]], axis=1)  # close the period at +pi
    n = sq.shape[1] - 1
    h = 2.0 * math.pi / n
    panels = 0.5 * h * (sq[:, 1:] + sq[:, :-1])
    zero = np.zeros((sq.shape[0], 1))
    left_cum = np.concatenate([zero, np.cumsum(panels, axis=1)], axis=1)  # int_{-pi}^{theta_i}
    right_cum = np.concatenate([np.cumsum(panels[:, ::-1], axis=1)[:, ::-1], zero], axis=1)  # int_{theta_i}^{pi}

    # both tails are sums of nonnegative pieces, so r = pi gives exactly 0
    # instead of the rounding residue of total - int_{-pi}^{pi}
    pos = (math.pi - r) / h  # -r sits pos panels right of -pi, +r sits pos panels left of +pi
    if abs(pos - round(pos)) < 1e-9:
        pos = float(round(pos))
    i = min(int(math.floor(pos)), n - 1)
    frac = pos - i

    def partial(values, cum, idx, nxt):
        # cum[idx] plus the linear piece over a fraction of the next panel
        at = values[:, idx] + frac * (values[:, nxt] - values[:, idx])
        return cum[:, idx] + 0.5 * frac * h * (values[:, idx] + at)

    left = partial(sq, left_cum, i, i + 1)
    rev = sq[:, ::-1]
    right = partial(rev, right_cum[:, ::-1], i, i + 1)
    return np.sqrt(left + right)


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    worst_margin: float
    worst_t: float
    margins: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "worst_margin": self.worst_margin,
            "worst_t": self.worst_t,
        }


def constraint_membership(kernel: SpatioTemporalKernel, r: float, epsilon_fn) -> MembershipReport:
    """Is ``truncation_error(t) < epsilon(t)`` at every sampled ``t``?

    ``margin(t) = epsilon(t) - truncation_error(t)``; the report carries the
    smallest margin and where it occurs.
    """
    err = truncation_error(kernel, r)
    t = kernel.t if isinstance(kernel, SpatioTemporalKernel) else np.zeros(1)
    eps = np.array([float(epsilon_fn(ti)) for ti in t])
    if np.any(eps < 0) or not np.all(np.isfinite(eps)):
        raise ValueError("epsilon must be finite and nonnegative on the time grid")
    margins = eps - err
    i = int(np.argmin(margins))
    return MembershipReport(bool(np.all(margins > 0)), float(margins[i]), float(t[i]), margins, err)


# ---------------------------------------------------------------------------
# symbol families of the optimal implementation
# ---------------------------------------------------------------------------

def block_families(plant: PlantParams, method: str = "closed_form", g_fn=None) -> dict:
    """``kappa -> RationalTF`` maps for the blocks of the optimal implementation.

    Keys: ``loop_block`` (``1 - G phi_psi``), ``gain_block`` (``G phi_u``),
    ``phi_psi`` and ``phi_u`` (closed loop). Modes are solved lazily and
    memoized; ``kappa`` and ``-kappa`` share one solve.
    """
    from functools import lru_cache

    from .implementation import build_implementation
    from .synthesis import solve_mode

    @lru_cache(maxsize=None)
    def impl(k):
        mode = ModeParams(plant, k)
        res = solve_mode(mode, method)
        return build_implementation(res, None if g_fn is None else g_fn(mode))

    def fam(attr):
        return lambda k: getattr(impl(abs(int(k))), attr)

    return {name: fam(name) for name in ("loop_block", "gain_block", "phi_psi", "phi_u")}
