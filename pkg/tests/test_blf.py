import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from safe_el.blf import (
    BlfParams,
    BlfState,
    adaptive_rates,
    blf_value,
    gain_N,
    regressor_phi,
    torque,
    validate_params,
)
from safe_el.errors import GainConditionViolated, TrackingErrorEscaped


def sva(k1=0.1, replicate=False, **kw):
    base = dict(lambda2=5.0, D1=0.2, L=0.3, k1=k1, eps=0.01, eps1=0.01, eps2=0.01, gamma_theta=1.0,
                replicate_paper=replicate)
    base.update(kw)
    return BlfParams(**base)


def test_regressor_examples():
    assert regressor_phi(np.zeros(2), 0.2) == pytest.approx(0.04)
    assert regressor_phi(np.array([3.0, 4.0]), 0.0) == pytest.approx(25.0)
    assert regressor_phi(np.array([1.0, 0.0]), 0.2) == pytest.approx(1.44)


def test_torque_zero_error():
    tau = torque(sva(), BlfState(3.0, 2.0), np.zeros(2), np.array([2.0, 1.0]), np.array([5.0, -1.0]))
    assert np.array_equal(tau, [0.0, 0.0])


def test_torque_proportional_only():
    tau = torque(sva(), BlfState(0.0, 0.0), np.array([0.1, 0.0]), np.array([1.0, 1.0]), np.zeros(2))
    assert np.allclose(tau, [-0.05, 0.0], atol=1e-15)


def test_torque_full_term_spot_check():
    n = 0.1 + 0.144**2 / (0.0144 + 0.01) + 0.01 / (0.01 + 0.01) + 1.0 / (0.1 + 0.01)
    tau = torque(sva(), BlfState(0.1, 0.1), np.array([0.1, 0.0]), np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    assert tau[0] == pytest.approx(-5 * 0.1 * n, rel=1e-14)
    assert tau[1] == 0.0


def test_torque_outside_barrier():
    with pytest.raises(TrackingErrorEscaped):
        torque(sva(), BlfState(), np.array([0.3, 0.0]), np.zeros(2), np.zeros(2))


@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(0, 5), st.floats(0, 5))
def test_torque_odd_in_error(e1, e2, th1, th2):
    p, s = sva(), BlfState(th1, th2)
    e, wh = np.array([e1, e2]), np.array([0.7, -0.3])
    assert np.allclose(torque(p, s, -e, wh, np.zeros(2)), -torque(p, s, e, wh, np.zeros(2)), rtol=0, atol=1e-14)


def test_adaptive_rates_examples():
    p = sva()
    assert adaptive_rates(p, BlfState(0.4, 0.2), np.zeros(2), np.ones(2)) == pytest.approx((-0.4, -0.2))
    r1, r2 = adaptive_rates(p, BlfState(0.0, 0.0), np.array([0.1, 0.0]), np.zeros(2))
    assert r1 == pytest.approx(0.05)
    assert r2 == pytest.approx(1.25)


@given(st.floats(-0.21, 0.21), st.floats(-0.21, 0.21), st.floats(-10, 10), st.floats(-10, 10))
def test_adaptive_rates_nonnegative_at_zero_estimate(e1, e2, w1, w2):
    r1, r2 = adaptive_rates(sva(), BlfState(0.0, 0.0), np.array([e1, e2]), np.array([w1, w2]))
    assert r1 >= 0 and r2 >= 0


def test_blf_value_examples():
    p = sva()
    assert blf_value(p, BlfState(1.0, 2.0), np.zeros(2), 1.0, 2.0) == 0.0
    e = np.array([p.L / math.sqrt(2), 0.0])
    assert blf_value(p, BlfState(1.0, 2.0), e, 1.0, 2.0) == pytest.approx(0.5 * math.log(2.0))
    vals = [blf_value(p, BlfState(), np.array([r, 0.0]), 0.5, 0.5) for r in np.linspace(0, 0.29, 30)]
    assert np.all(np.diff(vals) > 0)


def test_validate_params():
    assert validate_params(sva(k1=0.5)) == []
    assert sva().k1_min == pytest.approx(1 / 3)
    with pytest.raises(GainConditionViolated) as info:
        validate_params(sva(k1=0.1))
    assert info.value.diagnostics["k1_min"] == pytest.approx(1 / 3)
    warnings = validate_params(sva(k1=0.1, replicate=True))
    assert len(warnings) == 1
    with pytest.raises(GainConditionViolated):
        validate_params(sva(k1=0.5, eps=0.0))
    with pytest.raises(GainConditionViolated):
        validate_params(sva(k1=0.5, L=-1.0, replicate=True))


@given(st.floats(0, 1e6), st.floats(1e-6, 10))
def test_smoothing_bound(a, eps):
    # the subtraction cancels for a >> eps; allow its round-off
    assert a - a * a / (a + eps) <= eps + 4 * np.finfo(float).eps * a


def test_gain_N_finite_at_zero_error():
    n = gain_N(sva(), BlfState(1.0, 1.0), 0.0, 2.0, 3.0)
    assert math.isfinite(n) and n > 0


def test_nonnegativity_under_integration():
    # leak-only dynamics with a drive term from a bounded oscillating error
    from safe_el.numerics import OdeStepper, rk4_step

    p = sva()

    def rhs(t, x):
        e = np.array([0.25 * math.sin(5 * t), 0.0])
        return np.array(adaptive_rates(p, BlfState(x[0], x[1]), e, np.array([math.cos(t), 0.0])))

    s = OdeStepper(1e-3, rhs)
    x = np.array([0.1, 0.1])
    for k in range(5000):
        x = rk4_step(s, k * 1e-3, x)
        assert x.min() >= 0.0
