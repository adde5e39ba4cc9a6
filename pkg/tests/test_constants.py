import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from delayed_gd.constants import (
    C_TAU_LIMIT,
    HalfInteger,
    StepSizePolicy,
    alpha,
    c_tau,
    d_tau,
    j_constant,
    max_step_pl,
    max_step_strongly_convex,
    thm15_coefficient,
)

C_TAU_TABLE = {2: 0.3096, 3: 0.3292, 4: 0.3396, 5: 0.3459, 6: 0.3502, 7: 0.3534, 8: 0.3557}


@pytest.mark.parametrize("n, expected", [(0.5, 1.455), (1, 1.25), (Fraction(15, 2), 1.2), (1.5, 1.2), (HalfInteger(3), 1.2)])
def test_j_constant_values(n, expected):
    assert j_constant(n) == expected


@pytest.mark.parametrize("bad", [0, 0.0, -0.5, 0.3, 1.25])
def test_j_constant_rejects(bad):
    with pytest.raises(ValueError):
        j_constant(bad)


def test_half_integer_invariant():
    with pytest.raises(ValueError):
        HalfInteger(0)
    assert HalfInteger.of(2.5) == HalfInteger(5)
    assert HalfInteger(7).value == 3.5


def test_j_constant_nonincreasing():
    values = [j_constant(HalfInteger(k)) for k in range(1, 200)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_alpha_examples():
    assert alpha(1.0, 1.0) == 1.0
    assert alpha(0.1, 1.0) == pytest.approx(0.2 / 1.1, rel=1e-15)
    assert alpha(1e-12, 1.0) < 2e-12
    for bad in [(2.0, 1.0), (0.0, 1.0), (1.0, -1.0)]:
        with pytest.raises(ValueError):
            alpha(*bad)


@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3))
def test_alpha_between_mu_and_L(a, b):
    mu, L = min(a, b), max(a, b)
    assert mu * (1 - 1e-12) <= alpha(mu, L) <= L * (1 + 1e-12)


def test_c_tau_tau1_is_formula_value():
    # direct evaluation of 1 / (sqrt(6 * 1.25 + 1) + 1)
    assert c_tau(1) == pytest.approx(1 / (math.sqrt(8.5) + 1), rel=1e-15)
    assert c_tau(1) == pytest.approx(0.255397, abs=1e-6)


@pytest.mark.parametrize("tau, expected", sorted(C_TAU_TABLE.items()))
def test_c_tau_matches_table(tau, expected):
    assert abs(c_tau(tau) - expected) <= 5e-5


def test_c_tau_limit():
    assert abs(c_tau(10**6) - 0.3727) <= 1e-4
    assert C_TAU_LIMIT == pytest.approx(1 / math.sqrt(7.2))


def test_c_tau_increasing_and_bounded():
    values = [c_tau(t) for t in range(1, 10**4 + 1)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert max(values) < C_TAU_LIMIT


def test_d_tau_values():
    assert d_tau(25) == pytest.approx(0.8964, abs=5e-4)
    assert d_tau(1) == pytest.approx(2 / (math.sqrt(6) + 1), rel=1e-15)
    assert d_tau(1) == pytest.approx(0.5798, abs=1e-4)


def test_max_step_sc_tau1_symmetric():
    eta = max_step_strongly_convex(StepSizePolicy(L=1.0, mu=1.0, tau=1))
    assert eta == pytest.approx(c_tau(1), rel=1e-15)


@given(
    st.floats(1e-3, 1.0),
    st.floats(1e-3, 1e3),
    st.integers(1, 500),
)
def test_max_step_q1_equals_c_tau(ratio, L, tau):
    policy = StepSizePolicy(L=L, mu=ratio * L, tau=tau, q=1.0)
    eta = max_step_strongly_convex(policy)
    assert eta * L * tau == pytest.approx(c_tau(tau), rel=1e-14)
    # the first branch, L(1+q)/(5 alpha) >= 2/5, never binds at q = 1
    assert 2 * L / (5 * policy.alpha) >= 0.4 > c_tau(tau)


def test_max_step_large_q_limit():
    tau = 2
    limit = tau / ((math.sqrt(4 * j_constant(tau) * tau**2 + 1) + 1) * tau)
    eta = max_step_strongly_convex(StepSizePolicy(L=1.0, mu=1.0, tau=tau, q=1e12))
    assert eta == pytest.approx(limit, rel=1e-9)


def test_max_step_sc_requires_mu():
    with pytest.raises(ValueError):
        max_step_strongly_convex(StepSizePolicy(L=1.0, tau=3))


def test_max_step_pl_branches():
    # tiny zeta: the delay branch binds
    eta = max_step_pl(StepSizePolicy(L=2.0, zeta=1e-6, tau=25))
    assert eta == pytest.approx(d_tau(25) / (2.0 * 25), rel=1e-15)
    # zeta = L: 1/5 < D_tau so the first branch binds
    for tau in (1, 10, 1000):
        eta = max_step_pl(StepSizePolicy(L=3.0, zeta=3.0, tau=tau))
        assert eta == pytest.approx(1 / (5 * 3.0 * tau), rel=1e-15)
    with pytest.raises(ValueError):
        max_step_pl(StepSizePolicy(L=1.0, tau=1))


@given(st.floats(1e-4, 1.0), st.floats(1e-2, 1e2), st.integers(1, 1000), st.floats(0.01, 100))
def test_step_sizes_positive_finite(ratio, L, tau, q):
    policy = StepSizePolicy(L=L, mu=ratio * L, zeta=ratio * L, tau=tau, q=q)
    for eta in (max_step_strongly_convex(policy), max_step_pl(policy)):
        assert 0 < eta < math.inf


def test_policy_invariants():
    with pytest.raises(ValueError):
        StepSizePolicy(L=1.0, mu=2.0, tau=1)
    with pytest.raises(ValueError):
        StepSizePolicy(L=1.0, tau=0)
    with pytest.raises(ValueError):
        StepSizePolicy(L=1.0, tau=1, q=0.0)


def test_coefficient_below_two_when_admissible():
    for tau in range(1, 200):
        c = thm15_coefficient(1.0, tau, c_tau(tau) / tau)
        assert 1.0 <= c < 2.0
    assert thm15_coefficient(1.0, 1, 10.0) == math.inf
