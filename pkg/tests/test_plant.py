import math

import pytest
from hypothesis import given, strategies as st

from diffusls.plant import (
    ModeParams, NegativeTime, OutputOperators, PlantParams, a_hat, plant_tf, semigroup_symbol,
)
from diffusls.ratfun import RationalTF, coeff_distance


def mode(alpha=1.0, gamma=1.0, kappa=0):
    return ModeParams(PlantParams(alpha, gamma), kappa)


@pytest.mark.parametrize("alpha,kappa,expected", [(1, 0, 0.0), (1, 3, -9.0), (0.5, 2, -2.0)])
def test_a_hat(alpha, kappa, expected):
    assert a_hat(mode(alpha, 1.0, kappa)) == expected


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_params_rejected(bad):
    with pytest.raises(ValueError):
        PlantParams(bad, 1.0)
    with pytest.raises(ValueError):
        PlantParams(1.0, bad)


def test_kappa_must_be_integer():
    with pytest.raises(ValueError):
        mode(kappa=1.5)


def test_plant_tf_examples():
    p = plant_tf(mode(1, 1, 1))
    assert coeff_distance(p[0], RationalTF([1], [1, 1])) == 0
    assert coeff_distance(p[1], RationalTF.constant(1)) == 0
    p0 = plant_tf(mode(1, 2.5, 0))
    assert coeff_distance(p0[0], RationalTF([2.5], [0, 1])) == 0
    p2 = plant_tf(mode(1, 2, 2))
    assert coeff_distance(p2[0], RationalTF([2], [4, 1])) == 0


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.integers(-100, 100))
def test_plant_structure(alpha, gamma, kappa):
    m = mode(alpha, gamma, kappa)
    p = plant_tf(m)
    assert p[0].is_strictly_proper
    assert p[1].is_constant and p[1].limit_at_infinity() == 1.0
    assert a_hat(m) == a_hat(m.mirrored())


def test_output_operators():
    ops = OutputOperators(gamma=3.0)
    assert list(ops.C_hat) == [3.0, 0.0]
    assert list(ops.D_hat) == [0.0, 1.0]


def test_semigroup_examples():
    assert semigroup_symbol(mode(kappa=4), 0.0) == 1.0
    assert semigroup_symbol(mode(1, 1, 1), 1.0) == pytest.approx(math.exp(-1))
    assert semigroup_symbol(mode(kappa=0), 123.0) == 1.0
    with pytest.raises(NegativeTime):
        semigroup_symbol(mode(), -0.1)


@given(st.floats(0.01, 5), st.integers(-10, 10), st.floats(0, 2), st.floats(0, 2))
def test_semigroup_property(alpha, kappa, t1, t2):
    m = mode(alpha, 1.0, kappa)
    lhs = semigroup_symbol(m, t1 + t2)
    rhs = semigroup_symbol(m, t1) * semigroup_symbol(m, t2)
    # exp(-x) carries relative error ~ x * eps from rounding of the argument
    rel = 8e-16 * max(1.0, m.diffusion_rate * (t1 + t2))
    assert lhs == pytest.approx(rhs, rel=rel, abs=1e-300)
