"""Time-domain check of each mode's closed loop.

Two loops are integrated for a mode ``kappa``:

* static:  ``psi' = (-alpha kappa^2 + K) psi + w``, ``u = K psi``;
* dynamic: the plant mode wired to state-space realizations of the loop
  block ``1 - G phi_psi`` and the gain block ``G phi_u``, driven by ``n``
  and ``w``.

Both use the classical fourth-order Runge-Kutta method with a fixed step. For
``x' = lambda x`` one step multiplies by ``R(h lambda)``, with
``R(z) = 1 + z + z^2/2 + z^3/6 + z^4/24``; the local error is ``O(h^5)`` and
the global error ``O(h^4)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .implementation import ControllerImplementation, closed_loop_matrix
from .plant import ModeParams
from .ratfun import ImproperTF, RationalTF, companion_realization

DEFAULT_DT_FACTOR = 0.1
SETTLE_TIME_CONSTANTS = 8.0


class StepSizeTooLarge(ValueError):
    pass


# ---------------------------------------------------------------------------
# realizations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSpaceRealization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def transfer(self, s) -> complex:
        n = self.order
        if n == 0:
            return complex(self.D[0, 0])
        x = np.linalg.solve(s * np.eye(n) - self.A, self.B)
        return complex((self.C @ x + self.D)[0, 0])


def realize(tf: RationalTF, check_tol: float = 1e-8) -> StateSpaceRealization:
    """Controllable canonical form of a proper SISO transfer function.

    The order equals the degree of the (already reduced) denominator, so the
    realization is minimal. ``C (sI - A)^{-1} B + D`` is compared against
    ``tf`` at 20 points off the real axis.
    """
    if not tf.is_proper:
        raise ImproperTF(f"{tf!r} has no state-space realization")
    A, B, C, D = companion_realization(tf)
    if A.shape[0] == 0:
        return StateSpaceRealization(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), D)
    ss = StateSpaceRealization(A, B, C, D)
    scale = max(1.0, float(np.max(np.abs(tf.poles()))))
    pts = scale * (0.3 + 1j * np.logspace(-2, 2, 20))
    for s in pts:
        ref = complex(tf(s))
        got = ss.transfer(s)
        if abs(got - ref) > check_tol * max(1.0, abs(ref)):
            raise ArithmeticError(f"realization of {tf!r} fails at s={s}")
    return ss


# ---------------------------------------------------------------------------
# input signals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Signal:
    """Scalar input ``t -> value``.

    Piecewise-constant signals are sampled at the step midpoint for every
    Runge-Kutta stage, so a pulse aligned with the grid delivers exactly its
    area.
    """

    fn: Callable
    piecewise_constant: bool = False
    label: str = ""

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))

    def stage_values(self, t0: np.ndarray, h: float) -> np.ndarray:
        if self.piecewise_constant:
            mid = self(t0 + 0.5 * h)
            return np.stack([mid, mid, mid], axis=1)
        return np.stack([self(t0), self(t0 + 0.5 * h), self(t0 + h)], axis=1)


def zero() -> Signal:
    return Signal(lambda t: np.zeros_like(t), True, "zero")


def step(amplitude: float = 1.0, t_on: float = 0.0) -> Signal:
    return Signal(lambda t: np.where(t >= t_on, amplitude, 0.0), True, f"step({amplitude})")


def pulse(height: float, t_on: float, width: float) -> Signal:
    return Signal(lambda t: np.where((t >= t_on) & (t < t_on + width), height, 0.0), True,
                  f"pulse({height},{t_on},{width})")


def impulse(dt: float) -> Signal:
    """Unit-area rectangle of width ``dt`` starting at 0."""
    return pulse(1.0 / dt, 0.0, dt)


def sinusoid(amplitude: float, omega: float, phase: float = 0.0) -> Signal:
    return Signal(lambda t: amplitude * np.cos(omega * t + phase), False, f"cos({omega})")


def _signal(x):
    return zero() if x is None else x


# ---------------------------------------------------------------------------
# step-size control
# ---------------------------------------------------------------------------

def rk4_stability_function(z):
    z = np.asarray(z, dtype=complex)
    return 1.0 + z + z ** 2 / 2.0 + z ** 3 / 6.0 + z ** 4 / 24.0


def check_step_size(eigenvalues, dt: float) -> None:
    """Reject ``dt`` if any decaying mode would not decay numerically."""
    lam = np.asarray(eigenvalues, dtype=complex)
    lam = lam[lam.real < 0]
    if len(lam) and np.any(np.abs(rk4_stability_function(dt * lam)) >= 1.0):
        worst = lam[np.argmax(np.abs(lam))]
        raise StepSizeTooLarge(
            f"dt={dt:g} is outside the RK4 stability region for eigenvalue {worst:.6g} "
            f"(need roughly dt < {2.785 / abs(worst):.3g})")


def default_dt(eigenvalues, factor: float = DEFAULT_DT_FACTOR) -> float:
    lam = np.abs(np.asarray(eigenvalues, dtype=complex))
    top = float(np.max(lam)) if len(lam) else 0.0
    return factor / top if top > 0 else factor


def integrator_tolerance(eigenvalues, dt: float, n_steps: int) -> float:
    """``max_{lambda, n} |R(dt lambda)^n - exp(n dt lambda)|``.

    This is the worst global error of the scheme on the unforced modes over
    the simulated horizon, for a unit initial condition.
    """
    lam = np.asarray(eigenvalues, dtype=complex)
    if not len(lam):
        return 0.0
    n = np.arange(n_steps + 1)
    R = rk4_stability_function(dt * lam)
    err = np.abs(R[:, None] ** n[None, :] - np.exp(np.outer(lam, n * dt)))
    return float(np.max(err))


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationTrace:
    kappa: int
    t: np.ndarray
    psi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cost_integrand: np.ndarray
    dt: float
    decay_rate: float
    integrator_tolerance: float
    kind: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "psi", "u", "v", "cost_integrand"])
        for row in zip(self.t, self.psi, self.u, self.v, self.cost_integrand):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def _grid(t_final: float, dt: float):
    if not (t_final > 0 and math.isfinite(t_final)):
        raise ValueError("t_final must be positive and finite")
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    n = max(1, int(math.ceil(t_final / dt - 1e-9)))
    return n, np.arange(n + 1) * dt


def _run(A, B, x0, inputs, t_final, dt):
    eig = np.linalg.eigvals(A) if A.size else np.empty(0)
    dt = default_dt(eig) if dt is None else float(dt)
    check_step_size(eig, dt)
    n, t = _grid(t_final, dt)
    t0 = t[:-1]
    stage = np.stack([sig.stage_values(t0, dt) for sig in inputs], axis=2)
    X = _kernels.rk4_lti(A, B, x0, stage, dt)
    sample = np.stack([sig(t) for sig in inputs], axis=1)
    decay = float(np.min(-eig.real)) if len(eig) else math.inf
    return t, X, sample, dt, decay, integrator_tolerance(eig, dt, n)


def simulate_static(mode: ModeParams, k_static: float, psi0: float = 1.0, w=None,
                    t_final: float = 20.0, dt=None) -> SimulationTrace:
    """Plant mode under the static gain ``u = K psi``; ``v`` is reported as ``psi``."""
    A = np.array([[-mode.diffusion_rate + k_static]])
    B = np.array([[1.0]])
    t, X, _, dt, decay, tol = _run(A, B, np.array([psi0], dtype=float), [_signal(w)], t_final, dt)
    psi = X[:, 0]
    u = k_static * psi
    return SimulationTrace(mode.kappa, t, psi, u, psi.copy(),
                           mode.gamma ** 2 * psi ** 2 + u ** 2, dt, decay, tol, "static")


def interconnection(impl: ControllerImplementation):
    """State-space model of the dynamic loop.

    State ``[psi, x_L, x_M]``, inputs ``[n, w]``, outputs ``[psi, u, v]``.
    The loop block is strictly proper, so ``v`` has no algebraic loop.
    """
    L = realize(impl.loop_block)
    M = realize(impl.gain_block)
    if abs(L.D[0, 0]) > 0:
        raise ValueError("loop block must be strictly proper")
    d = impl.mode.diffusion_rate
    nl, nm = L.order, M.order
    nx = 1 + nl + nm
    iL = slice(1, 1 + nl)
    iM = slice(1 + nl, nx)
    # v = psi + C_L x_L + n
    Cv = np.zeros((1, nx))
    Cv[0, 0] = 1.0
    Cv[0, iL] = L.C
    Dv = np.array([[1.0, 0.0]])
    # u = C_M x_M + D_M v
    Cu = M.D @ Cv
    Cu[0, iM] += M.C[0]
    Du = M.D @ Dv
    A = np.zeros((nx, nx))
    B = np.zeros((nx, 2))
    A[0] = Cu[0]
    A[0, 0] += -d
    B[0] = Du[0] + np.array([0.0, 1.0])
    A[iL] += L.B @ Cv
    A[iL, iL] += L.A
    B[iL] = L.B @ Dv
    A[iM] += M.B @ Cv
    A[iM, iM] += M.A
    B[iM] = M.B @ Dv
    C = np.vstack([np.eye(1, nx), Cu, Cv])
    D = np.vstack([np.zeros((1, 2)), Du, Dv])
    return A, B, C, D


def simulate_implementation(impl: ControllerImplementation, psi0: float = 1.0, n=None, w=None,
                            t_final: float = 20.0, dt=None) -> SimulationTrace:
    """Plant mode driven through the dynamic controller, controller states at rest."""
    A, B, C, D = interconnection(impl)
    x0 = np.zeros(A.shape[0])
    x0[0] = psi0
    t, X, inp, dt, decay, tol = _run(A, B, x0, [_signal(n), _signal(w)], t_final, dt)
    Y = X @ C.T + inp @ D.T
    psi, u, v = Y[:, 0], Y[:, 1], Y[:, 2]
    return SimulationTrace(impl.mode.kappa, t, psi, u, v,
                           impl.mode.gamma ** 2 * psi ** 2 + u ** 2, dt, decay, tol, "implementation")


# ---------------------------------------------------------------------------
# cost and frequency response
# ---------------------------------------------------------------------------

def mode_cost_quadrature(trace: SimulationTrace) -> float:
    """Trapezoid integral of the cost plus the exponential tail past ``t_final``."""
    body = float(np.trapezoid(trace.cost_integrand, trace.t))
    tail = float(trace.cost_integrand[-1]) / (2.0 * trace.decay_rate) if trace.decay_rate > 0 else math.inf
    return body + tail


def lqr_cost_quadrature(traces, gamma=None, mirror: bool = True) -> float:
    """``sum_kappa int (gamma^2 psi^2 + u^2) dt`` over the given traces.

    The integrand is stored on each trace already; ``gamma`` is accepted for
    interface symmetry and ignored. With ``mirror`` the traces are taken to
    cover ``kappa >= 0`` only and every ``kappa > 0`` counts for ``+-kappa``.
    """
    total = 0.0
    for tr in traces:
        weight = 2.0 if (mirror and tr.kappa != 0) else 1.0
        total += weight * mode_cost_quadrature(tr)
    return total


_CHANNEL_ROWS = {"psi": 0, "u": 1, "v": 2}
_CHANNEL_COLS = {"n": 0, "w": 1}


def frequency_response_check(impl: ControllerImplementation, omega_grid, channel=("psi", "w"),
                             amplitude: float = 1.0, periods: int = 4) -> float:
    """Largest relative gap between simulated and predicted sinusoidal gains.

    For each ``omega`` the loop is driven by ``amplitude cos(omega t)`` on the
    chosen input, run for 8 slowest time constants, then ``a cos + b sin + c``
    is fitted over ``periods`` periods. The complex gain ``(a - j b) /
    amplitude`` is compared with the closed-loop entry at ``j omega``.
    """
    out_name, in_name = channel
    row, col = _CHANNEL_ROWS[out_name], _CHANNEL_COLS[in_name]
    entry = closed_loop_matrix(impl)[row, col]
    A, B, C, D = interconnection(impl)
    eig = np.linalg.eigvals(A)
    settle = SETTLE_TIME_CONSTANTS / float(np.min(-eig.real))
    worst = 0.0
    for omega in np.atleast_1d(np.asarray(omega_grid, dtype=float)):
        period = 2.0 * math.pi / omega if omega > 0 else settle
        dt = min(default_dt(eig), period / 64.0)
        window = periods * period
        drive = sinusoid(amplitude, omega)
        inputs = [drive, zero()] if col == 0 else [zero(), drive]
        t, X, inp, *_ = _run(A, B, np.zeros(A.shape[0]), inputs, settle + window, dt)
        y = (X @ C.T + inp @ D.T)[:, row]
        keep = t >= settle
        if amplitude == 0.0:
            worst = max(worst, float(np.max(np.abs(y[keep]))))
            continue
        tk = t[keep]
        if omega > 0:
            basis = np.column_stack([np.cos(omega * tk), np.sin(omega * tk), np.ones_like(tk)])
            (a, b, _), *_ = np.linalg.lstsq(basis, y[keep], rcond=None)
            measured = complex(a, -b) / amplitude
        else:
            measured = complex(np.mean(y[keep])) / amplitude
        predicted = complex(entry(1j * omega))
        worst = max(worst, abs(measured - predicted) / max(abs(predicted), 1e-12))
    return worst
