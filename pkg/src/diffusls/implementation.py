"""Dynamic controller realizing a given closed loop, one mode at a time.

The loop is

    v = eta + psi + n,     eta = (1 - G phi_psi) v,     u = G phi_u v,
    (s + alpha kappa^2) psi = u + w,

with ``n`` entering at the summing junction and ``w`` at the plant state.
For any affine-feasible pair and an admissible ``G`` the closed loop from
``(n, w)`` to ``(psi, u, v)`` is

    [[phi_u,                  phi_psi],
     [(s + alpha kappa^2) phi_u, phi_u ],
     [(s + alpha kappa^2)/G,   1/G    ]].

:func:`closed_loop_matrix` builds this table literally and also by solving
the loop equations directly, and insists they agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ratfun
from .plant import ModeParams
from .ratfun import RationalTF
from .synthesis import SynthesisResult

ROWS = ("psi", "u", "v")
COLS = ("n", "w")
LOOP_SOLVE_TOL = 1e-9
STABILITY_MARGIN = 1e-9


class IllPosedLoop(ValueError):
    pass


class InvalidG(ValueError):
    pass


class LoopSolveMismatch(ArithmeticError):
    pass


@dataclass(frozen=True)
class GCheck:
    name: str
    passed: bool
    evidence: dict


@dataclass(frozen=True)
class ControllerImplementation:
    mode: ModeParams
    g_hat: RationalTF
    loop_block: RationalTF
    gain_block: RationalTF
    recovered_k: RationalTF
    phi_psi: RationalTF
    phi_u: RationalTF

    def with_blocks(self, loop_block=None, gain_block=None) -> "ControllerImplementation":
        """Copy with replaced blocks, for perturbation experiments."""
        return ControllerImplementation(
            self.mode, self.g_hat,
            self.loop_block if loop_block is None else loop_block,
            self.gain_block if gain_block is None else gain_block,
            self.recovered_k, self.phi_psi, self.phi_u,
        )


@dataclass(frozen=True)
class ClosedLoopMatrix:
    """3x2 table of transfer functions, rows (psi, u, v), columns (n, w)."""

    entries: tuple
    loop_solve_deviation: float = 0.0

    def __getitem__(self, key):
        r, c = key
        r = ROWS.index(r) if isinstance(r, str) else r
        c = COLS.index(c) if isinstance(c, str) else c
        return self.entries[r][c]

    def items(self):
        for i, r in enumerate(ROWS):
            for j, c in enumerate(COLS):
                yield r, c, self.entries[i][j]

    def to_list(self) -> list:
        return [[e.to_dict() for e in row] for row in self.entries]


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_real_part: float
    margin: float
    entries: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "max_real_part": self.max_real_part,
            "margin": self.margin,
            "entries": self.entries,
        }


def default_g(mode: ModeParams) -> RationalTF:
    """``G = s + 1 + kappa^2``."""
    return RationalTF([1.0 + mode.kappa ** 2, 1.0])


def _stable_proper(tf: RationalTF):
    poles = tf.poles()
    proper = tf.is_proper
    ok = proper and (len(poles) == 0 or bool(np.all(poles.real < 0)))
    return ok, {"proper": proper, "poles": _fmt_poles(poles)}


def _fmt_poles(poles):
    return [[float(p.real), float(p.imag)] for p in poles]


def validate_g(mode: ModeParams, g: RationalTF) -> list:
    """Admissibility of ``G``; failures are reported, never raised.

    1. ``G^{-1}`` is stable and proper.
    2. ``s G^{-1} -> 1`` as ``s -> infinity``.
    3. ``G^{-1} (s + alpha kappa^2)`` is stable and proper.
    """
    if g.is_zero:
        bad = {"reason": "G is identically zero"}
        return [GCheck("ginv_stable_proper", False, bad),
                GCheck("s_ginv_limit_one", False, bad),
                GCheck("ginv_generator_stable_proper", False, bad)]
    ginv = g.inv()
    ok1, ev1 = _stable_proper(ginv)
    s_ginv = RationalTF.s() * ginv
    try:
        lim = s_ginv.limit_at_infinity()
    except ratfun.ImproperLimit:
        lim = float("inf")
    ok2 = bool(np.isfinite(lim) and abs(lim - 1.0) <= 1e-12)
    ok3, ev3 = _stable_proper(ginv * RationalTF([mode.diffusion_rate, 1.0]))
    return [
        GCheck("ginv_stable_proper", ok1, ev1),
        GCheck("s_ginv_limit_one", ok2, {"limit": lim}),
        GCheck("ginv_generator_stable_proper", ok3, ev3),
    ]


def implementation_from_pair(mode: ModeParams, phi_psi: RationalTF, phi_u: RationalTF, g=None) -> ControllerImplementation:
    """Controller blocks for an arbitrary closed-loop pair."""
    g = default_g(mode) if g is None else g
    failed = [c.name for c in validate_g(mode, g) if not c.passed]
    if failed:
        raise InvalidG(f"G = {g!r} fails {', '.join(failed)}")
    loop_block = 1.0 - g * phi_psi
    if not loop_block.is_strictly_proper:
        raise IllPosedLoop(f"1 - G phi_psi = {loop_block!r} is not strictly proper")
    return ControllerImplementation(
        mode=mode,
        g_hat=g,
        loop_block=loop_block,
        gain_block=g * phi_u,
        recovered_k=phi_u / phi_psi,
        phi_psi=phi_psi,
        phi_u=phi_u,
    )


def build_implementation(result: SynthesisResult, g=None) -> ControllerImplementation:
    return implementation_from_pair(result.mode, result.phi_psi, result.phi_u, g)


def eq28_matrix(impl: ControllerImplementation) -> ClosedLoopMatrix:
    """The closed-loop table written down from ``phi_psi``, ``phi_u`` and ``G``."""
    gen = RationalTF([impl.mode.diffusion_rate, 1.0])
    ginv = impl.g_hat.inv()
    return ClosedLoopMatrix((
        (impl.phi_u, impl.phi_psi),
        (gen * impl.phi_u, impl.phi_u),
        (gen * ginv, ginv),
    ))


def _det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def loop_solve(impl: ControllerImplementation) -> ClosedLoopMatrix:
    """Closed loop from the interconnection equations alone.

    Unknowns ``x = (v, psi, u)``; the equations

        (1 - L) v - psi       = n
        (s + d) psi - u       = w
        -M v + u              = 0

    with ``L`` the loop block and ``M`` the gain block are solved by
    Cramer's rule over rational functions. Only the blocks are used, so a
    perturbed implementation is solved faithfully.
    """
    one, zero = RationalTF.constant(1.0), RationalTF.constant(0.0)
    gen = RationalTF([impl.mode.diffusion_rate, 1.0])
    A = [
        [one - impl.loop_block, -one, zero],
        [zero, gen, -one],
        [-impl.gain_block, zero, one],
    ]
    det = _det3(A)
    if det.is_zero:
        raise IllPosedLoop("interconnection is singular")
    rhs_cols = {"n": [one, zero, zero], "w": [zero, one, zero]}
    sol = {}
    for c, rhs in rhs_cols.items():
        for k, name in enumerate(("v", "psi", "u")):
            Ak = [[rhs[i] if j == k else A[i][j] for j in range(3)] for i in range(3)]
            sol[name, c] = _det3(Ak) / det
    return ClosedLoopMatrix(tuple(tuple(sol[r, c] for c in COLS) for r in ROWS))


def matrix_distance(a: ClosedLoopMatrix, b: ClosedLoopMatrix) -> float:
    return max(ratfun.coeff_distance(x, y) for (_, _, x), (_, _, y) in zip(a.items(), b.items()))


def closed_loop_matrix(impl: ControllerImplementation, tol: float = LOOP_SOLVE_TOL) -> ClosedLoopMatrix:
    """Closed-loop table, cross-checked against the direct loop solve.

    Raises
    ------
    LoopSolveMismatch
        If the two constructions differ by more than ``tol`` in any
        coefficient.
    """
    literal = eq28_matrix(impl)
    solved = loop_solve(impl)
    dev = matrix_distance(literal, solved)
    if not dev <= tol:
        raise LoopSolveMismatch(f"loop solve differs from the closed-loop table by {dev:.3e}")
    return ClosedLoopMatrix(literal.entries, loop_solve_deviation=dev)


def internal_stability_report(matrix: ClosedLoopMatrix, margin: float = STABILITY_MARGIN, omega_grid=None) -> StabilityReport:
    """Poles, worst real part and grid H-infinity value of every entry.

    The verdict is stable iff every entry is proper and every pole has real
    part ``<= -margin``.
    """
    entries = []
    worst = -np.inf
    stable = True
    for r, c, tf in matrix.items():
        poles = tf.poles()
        mrp = float(np.max(poles.real)) if len(poles) else -np.inf
        worst = max(worst, mrp)
        ok = tf.is_proper and mrp <= -margin
        stable = stable and ok
        hinf = ratfun.hinf_norm_on_axis(tf, omega_grid) if ok else None
        entries.append({
            "row": r, "col": c,
            "poles": _fmt_poles(poles),
            "max_real_part": mrp if np.isfinite(mrp) else None,
            "hinf_on_grid": hinf,
            "proper": tf.is_proper,
            "stable": ok,
        })
    return StabilityReport(
        stable=bool(stable),
        max_real_part=float(worst) if np.isfinite(worst) else None,
        margin=margin,
        entries=entries,
    )
