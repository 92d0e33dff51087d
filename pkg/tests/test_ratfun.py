import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.integrate import quad

from diffusls import ratfun
from diffusls.ratfun import Polynomial, RationalTF, TFVector

R2 = math.sqrt(2.0)


def close(a, b, tol=1e-12):
    return ratfun.coeff_distance(a, b) <= tol


# --- strategies --------------------------------------------------------------

stable_pole = st.floats(0.2, 5.0)
coef = st.floats(-3.0, 3.0).filter(lambda x: abs(x) > 1e-3)


@st.composite
def stable_strictly_proper(draw, max_deg=3):
    n = draw(st.integers(1, max_deg))
    rates = sorted(draw(stable_pole) for _ in range(n))
    # keep poles apart so partial fractions stay well conditioned
    for i in range(1, n):
        rates[i] = max(rates[i], rates[i - 1] + 0.2)
    poles = [-r for r in rates]
    num = [draw(coef) for _ in range(draw(st.integers(1, n)))]
    return RationalTF(num, np.polynomial.polynomial.polyfromroots(poles))


@st.composite
def generic_tf(draw):
    n = draw(st.integers(1, 3))
    den = [draw(coef) for _ in range(n)] + [1.0]
    num = [draw(coef) for _ in range(draw(st.integers(1, n + 1)))]
    return RationalTF(num, den)


# --- Polynomial ----------------------------------------------------------------

def test_polynomial_normalizes_leading_zeros():
    p = Polynomial([1.0, 2.0, 0.0, 0.0])
    assert p.degree == 1
    assert list(p.coeffs) == [1.0, 2.0]
    z = Polynomial([0.0, 0.0])
    assert z.is_zero and z.degree == -1


def test_polynomial_rejects_nonfinite():
    with pytest.raises(ValueError):
        Polynomial([1.0, np.nan])


def test_quadratic_roots_accurate_for_wide_spread():
    # roots -1e-6 and -1e6: the naive formula loses the small one entirely
    p = Polynomial(np.polynomial.polynomial.polyfromroots([-1e-6, -1e6]))
    r = np.sort(p.roots().real)
    assert r[0] == pytest.approx(-1e6, rel=1e-14)
    assert r[1] == pytest.approx(-1e-6, rel=1e-12)


# --- add / mul / inv --------------------------------------------------------------

def test_add_identity():
    a = RationalTF([1], [1, 1])
    assert close(a + 0.0, a)


def test_add_two_first_order():
    got = RationalTF([1], [1, 1]) + RationalTF([1], [2, 1])
    assert close(got, RationalTF([3, 2], [2, 3, 1]))


def test_add_same_denominator_example():
    g, al, k = 1.0, 1.0, 1
    got = RationalTF([g], [1, 1]) + RationalTF([al * k * k - 1], [1, 1])
    assert close(got, RationalTF([1], [1, 1]))


def test_mul_cancels():
    assert close(RationalTF([1], [1, 1]) * RationalTF([1, 1]), RationalTF.constant(1.0))


def test_inv():
    assert close(ratfun.inv(RationalTF([2, 1])), RationalTF([1], [2, 1]))
    with pytest.raises(ratfun.DivisionByZeroTF):
        ratfun.inv(RationalTF.constant(0.0))


def test_outer_times_inverse_is_one():
    u_o = RationalTF([R2, 1], [1, 1])
    assert close(u_o * u_o.inv(), RationalTF.constant(1.0))


def test_zero_denominator_rejected():
    with pytest.raises(ratfun.DivisionByZeroTF):
        RationalTF([1], [0.0])


def test_properness_queries():
    assert RationalTF([1], [1, 1]).is_strictly_proper
    b = RationalTF([1, 1], [2, 1])
    assert b.is_proper and not b.is_strictly_proper
    assert not RationalTF([0, 0, 1], [1, 1]).is_proper


# --- para-conjugation --------------------------------------------------------------

def test_para_conjugate_first_order():
    assert close(ratfun.para_conjugate(RationalTF([1], [1, 1])), RationalTF([1], [1, -1]))


def test_para_conjugate_inner_entry():
    f = RationalTF([1, 1], [R2, 1])
    got = f.para_conjugate()
    s = 0.3 + 0.7j
    assert got(s) == pytest.approx((-s + 1) / (-s + R2))


def test_para_conjugate_fixed_example_involution():
    f = RationalTF([3, 1], [1, 1, 1])
    assert close(f.para_conjugate().para_conjugate(), f)


@given(generic_tf())
def test_para_conjugate_involution(f):
    assert close(f.para_conjugate().para_conjugate(), f, 1e-12)


# --- partial fractions and projection ---------------------------------------------

def test_partial_fractions_mixed():
    f = RationalTF([1], np.polynomial.polynomial.polymul([1, 1], [2, -1]))
    poly, poles = ratfun.partial_fractions(f)
    assert poly.is_zero
    res = {round(p.location.real, 9): p.residue for p in poles}
    assert res[-1.0] == pytest.approx(1 / 3)
    # 1/(3(2-s)) = (-1/3)/(s-2): standard residue convention
    assert res[2.0] == pytest.approx(-1 / 3)


def test_partial_fractions_pure_polynomial():
    poly, poles = ratfun.partial_fractions(RationalTF([2, 1], [2, 1]))
    assert list(poly.coeffs) == [1.0]
    assert len(poles) == 0


def test_partial_fractions_double_pole():
    _, poles = ratfun.partial_fractions(RationalTF([1], [1, 2, 1]))
    assert len(poles) == 1
    (p,) = poles
    assert p.location == pytest.approx(-1.0)
    assert p.multiplicity == 2
    assert p.coeffs[0] == pytest.approx(0.0, abs=1e-12)
    assert p.coeffs[1] == pytest.approx(1.0)


def test_partial_fractions_merges_nearly_equal_poles():
    f = RationalTF([1], np.polynomial.polynomial.polyfromroots([-1.0, -1.0 - 1e-9]))
    _, poles = ratfun.partial_fractions(f)
    assert poles.total_multiplicity == 2 and len(poles) == 1


def test_partial_fractions_ill_conditioned():
    f = RationalTF([1], np.polynomial.polynomial.polyfromroots([-1.0, -1.0 - 1e-6]))
    with pytest.raises(ratfun.IllConditionedPoles):
        ratfun.partial_fractions(f)


def test_complex_poles_come_in_conjugate_pairs():
    f = RationalTF([1, 2], [5, 2, 1])  # poles -1 +- 2j
    _, poles = ratfun.partial_fractions(f)
    locs = sorted(poles, key=lambda p: p.location.imag)
    assert locs[0].location == pytest.approx(np.conj(locs[1].location))
    assert locs[0].residue == pytest.approx(np.conj(locs[1].residue))


@given(generic_tf(), st.integers(0, 2**31 - 1))
def test_partial_fraction_reconstruction(f, seed):
    try:
        poly, poles = ratfun.partial_fractions(f)
    except ratfun.IllConditionedPoles:
        return
    assert poles.total_multiplicity == f.den.degree
    rng = np.random.default_rng(seed)
    s = rng.normal(size=100) * 3 + 1j * rng.normal(size=100) * 3
    ref = f(s)
    got = poly(s) + poles(s)
    assert np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref))) <= 1e-9


def test_stable_projection_examples():
    f = RationalTF([1], np.polynomial.polynomial.polymul([1, 1], [2, -1]))
    assert close(ratfun.stable_projection(f), RationalTF([1 / 3], [1, 1]))
    a = RationalTF([1], [1, 1])
    assert close(ratfun.stable_projection(a), a)
    assert ratfun.stable_projection(RationalTF([1], [2, -1])).is_zero


def test_stable_projection_axis_pole():
    with pytest.raises(ratfun.ImaginaryAxisPole):
        ratfun.stable_projection(RationalTF([1], [0, 1]))


@given(stable_strictly_proper(), stable_strictly_proper())
def test_projection_split_is_exact(a, b):
    f = a + b.para_conjugate()
    try:
        p = ratfun.stable_projection(f)
        q = ratfun.antistable_part(f)
    except ratfun.IllConditionedPoles:
        assume(False)
    assert all(z.real < 0 for z in p.poles())
    assert all(z.real > 0 for z in q.poles())
    assert close(p + q, f, 1e-9)
    s = np.array([0.1 + 0.3j, 1.7j, -0.4 + 2j])
    assert np.allclose((f - p)(s), q(s), rtol=1e-9, atol=1e-12)


# --- norms ------------------------------------------------------------------------

def test_h2_examples():
    assert ratfun.h2_norm(RationalTF([1], [1, 1])) == pytest.approx(1 / R2, rel=1e-14)
    assert ratfun.h2_norm(RationalTF.constant(0.0)) == 0.0
    assert ratfun.h2_norm(RationalTF([3], [2, 1])) == pytest.approx(1.5, rel=1e-14)


def test_h2_repeated_pole():
    # 1/(s+1)^3: (1/2pi) int dw/(1+w^2)^3 = 3/16
    assert ratfun.h2_norm(RationalTF([1], [1, 3, 3, 1])) == pytest.approx(math.sqrt(3 / 16), rel=1e-12)


@given(stable_strictly_proper())
def test_h2_lyapunov_and_residue_routes_agree(a):
    assert ratfun.h2_norm(a) == pytest.approx(ratfun.h2_norm_residues(a), rel=1e-9)


def test_h2_vector_is_root_sum_square():
    v = TFVector([RationalTF([1], [1, 1]), RationalTF([3], [2, 1])])
    assert ratfun.h2_norm(v) == pytest.approx(math.sqrt(0.5 + 2.25))


def test_h2_rejects_unstable_or_improper():
    with pytest.raises(ratfun.UnstableOrImproper):
        ratfun.h2_norm(RationalTF([1], [-1, 1]))
    with pytest.raises(ratfun.UnstableOrImproper):
        ratfun.h2_norm(RationalTF([1, 1], [1, 1]))


@given(stable_strictly_proper())
def test_h2_matches_quadrature(a):
    # even integrand, so integrate [0, inf) and double; quad maps the
    # infinite range itself
    f = lambda w: abs(a(1j * w)) ** 2  # noqa: E731
    val, _ = quad(f, 0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)
    ref = math.sqrt(val / math.pi)
    assert ratfun.h2_norm(a) == pytest.approx(ref, rel=1e-5)


@given(stable_strictly_proper(), stable_strictly_proper(), stable_strictly_proper(max_deg=2),
       st.floats(0.3, 3.0), st.floats(0.0, 3.0))
def test_pythagoras_with_inner_factor(h1, h2, t, gamma, d):
    # F = [gamma; s + d]/(s + a) is inner. E' = H - F P(F~ H) leaves
    # F~ E' = (I - P)(F~ H), which is antistable, so E' is orthogonal to F T.
    a = math.hypot(gamma, d)
    den = [a, 1.0]
    F = TFVector([RationalTF([gamma], den), RationalTF([d, 1.0], den)])
    H = TFVector([h1, h2])
    try:
        P = ratfun.stable_projection(F.para_conjugate().dot(H))
        E = H - F * P
        lhs = ratfun.h2_norm(E - F * t) ** 2
        rhs = ratfun.h2_norm(E) ** 2 + ratfun.h2_norm(t) ** 2
    except ratfun.IllConditionedPoles:
        assume(False)
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_hinf_examples():
    assert ratfun.hinf_norm_on_axis(RationalTF([1], [1, 1])) == pytest.approx(1.0)
    assert ratfun.hinf_norm_on_axis(RationalTF.constant(5.0)) == 5.0
    with pytest.raises(ratfun.UnstablePole):
        ratfun.hinf_norm_on_axis(RationalTF([1], [-1, 1]))


def test_inner_vector_has_unit_modulus():
    den = [R2, 1]
    u1, u2 = RationalTF([1], den), RationalTF([1, 1], den)
    w = ratfun.DEFAULT_OMEGA_GRID
    mod = np.abs(u1(1j * w)) ** 2 + np.abs(u2(1j * w)) ** 2
    assert np.max(np.abs(mod - 1)) <= 1e-12


# --- evaluation -----------------------------------------------------------------

def test_eval_and_limits():
    assert ratfun.evaluate(RationalTF([1], [1, 1]), 0) == pytest.approx(1.0)
    k = 2
    f = RationalTF([0, 1], [1 + k * k, 1])  # s / (s + 1 + kappa^2)
    assert ratfun.limit_at_infinity(f) == 1.0
    assert RationalTF([1], [1, 1]).limit_at_infinity() == 0.0
    with pytest.raises(ratfun.ImproperLimit):
        RationalTF([0, 1]).limit_at_infinity()
    with pytest.raises(ratfun.PoleEvaluation):
        RationalTF([1], [1, 1])(-1.0)


def test_strictly_proper_part():
    f = RationalTF([3, 2], [1, 1])  # 2 + 1/(s+1)
    assert close(f.strictly_proper_part(), RationalTF([1], [1, 1]))


def test_json_round_trip():
    f = RationalTF([1.5, -2], [3, 2, 1])
    d = json.loads(json.dumps(f.to_dict()))
    assert d == {"num": [1.5, -2.0], "den": [3.0, 2.0, 1.0]}
    assert RationalTF.from_dict(d) == f
    assert RationalTF.constant(0).to_dict()["num"] == [0.0]


def test_coeff_distance_structure_mismatch_is_infinite():
    assert ratfun.coeff_distance(RationalTF([1], [1, 1]), RationalTF([1], [1, 0, 1])) == math.inf


def test_values_are_immutable():
    f = RationalTF([1], [1, 1])
    with pytest.raises(ValueError):
        f.num.coeffs[0] = 2.0
