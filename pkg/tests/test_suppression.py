import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqcdyn.baths import (
    ClassicalBath, LorentzDrude, OhmicBath, TabulatedBath, TabulatedSpectralDensity, timedep_rate_classical,
    timedep_rate_ohmic,
)
from aqcdyn.suppression import (
    DDModulation, DDSchedule, EGPGeneralModulation, EGPModulation, NoModulation, PiecewiseConstant, QuadratureError,
    StepRejected, egp_phase, leakage_rates, m_dd, m_egp, m_egp_general, p0_dynamics,
)

flip_lists = st.lists(st.floats(0.0, 5.0, allow_nan=False), max_size=12).map(sorted)


def test_m_egp_examples():
    assert m_egp(1.3, 2, 0.0) == 1
    assert m_egp(1.3, 0, 7.1) == 1
    assert m_egp(1.0, 3, math.pi / 6) == pytest.approx(-1, abs=1e-15)


def test_m_dd_examples():
    assert m_dd(DDSchedule((0.5, 1.0)), 2.0, 0.0) == 1
    assert all(m_dd(DDSchedule(), 3.0, tau) == 1 for tau in np.linspace(0, 3, 13))
    s = DDSchedule.periodic(0.5, 10.0)
    assert m_dd(s, 2.25, 0.5) == -1
    with pytest.raises(ValueError):
        m_dd(s, 1.0, 1.5)
    with pytest.raises(ValueError):
        m_dd(s, 11.0, 1.0)


def test_m_egp_general_examples():
    const = [PiecewiseConstant.constant(0.7), PiecewiseConstant.constant(0.7)]
    for t, tau in ((1.0, 0.3), (4.0, 4.0), (2.5, 0.0)):
        assert m_egp_general(const, t, tau) == pytest.approx(m_egp(0.7, 2, tau), abs=1e-14)
    zero = [PiecewiseConstant.constant(0.0)]
    assert m_egp_general(zero, 3.0, 2.0) == 1
    step = PiecewiseConstant((0.0, 1.0, 2.0), (1.0, 3.0, 0.5))
    # area over [0.5, 2.5] = 0.5*1 + 1*3 + 0.5*0.5
    assert egp_phase([step], 2.5, 2.0) == pytest.approx(2 * 3.75, rel=1e-14)
    with pytest.raises(ValueError):
        egp_phase([step], 1.0, 2.0)


@given(st.floats(0, 10), st.integers(0, 6), st.floats(0, 50), flip_lists,
       st.lists(st.floats(-5, 5), min_size=1, max_size=4))
def test_unit_modulus(alpha, w, t, flips, vals):
    tau = t * 0.37
    assert abs(abs(m_egp(alpha, w, tau)) - 1) < 1e-15
    assert abs(m_dd(DDSchedule(tuple(flips)), t, tau)) == 1
    pc = PiecewiseConstant(tuple(float(i) for i in range(len(vals))), tuple(vals))
    assert abs(abs(m_egp_general([pc], t, tau)) - 1) < 1e-14


BATHS = [
    ClassicalBath(1.0, 3.0),
    OhmicBath(0.1, 3.0, 1.0),
    TabulatedBath(TabulatedSpectralDensity(np.linspace(0, 60, 601), LorentzDrude(0.1, 3.0)(np.linspace(0, 60, 601))),
                  1.0),
]


@pytest.mark.parametrize("bath", BATHS, ids=["classical", "ohmic", "tabulated"])
@settings(max_examples=8, deadline=None)
@given(flips=st.lists(st.floats(0.01, 1.99), max_size=6).map(sorted), t=st.floats(0.05, 2.0))
def test_dd_symmetry_bit_identical(bath, flips, t):
    rp, rm = leakage_rates(bath, DDModulation(DDSchedule(tuple(flips), horizon=2.0)), t)
    assert rp == rm


@pytest.mark.parametrize("g", [0.5, 3.0, 20.0])
@pytest.mark.parametrize("alpha", [0.3, 1.0, 4.0])
@pytest.mark.parametrize("t", [0.01, 0.4, 3.0, 15.0])
def test_egp_classical_closed_form(g, alpha, t):
    rp, rm = leakage_rates(ClassicalBath(1.0, g), EGPModulation(alpha, 1), t)
    ref = timedep_rate_classical(g, 2 * alpha, t)
    assert rp == pytest.approx(ref, rel=1e-8)
    assert rm == pytest.approx(ref, rel=1e-8)


def test_no_modulation_classical():
    for t in (0.1, 1.0, 4.0):
        rp, rm = leakage_rates(ClassicalBath(2.0, 3.0), NoModulation(), t)
        assert rp == rm == pytest.approx(2 * 2.0 * (1 - math.exp(-3 * t)) / 3, rel=1e-12)
    assert leakage_rates(ClassicalBath(2.0, 3.0), NoModulation(), 0.0) == (0.0, 0.0)


@pytest.mark.parametrize("alpha", [1.0, 2.0, 4.0])
def test_egp_ohmic_matches_closed_form(alpha):
    bath = OhmicBath(0.1, 3.0, 1.0)
    for t in (0.1, 0.7, 3.0):
        rp, rm = leakage_rates(bath, EGPModulation(alpha, 1), t)
        assert rp == pytest.approx(timedep_rate_ohmic(0.1, 3.0, 1.0, 2 * alpha, t, +1), rel=1e-6)
        assert rm == pytest.approx(timedep_rate_ohmic(0.1, 3.0, 1.0, 2 * alpha, t, -1), rel=1e-6)


def test_general_egp_constant_matches_egp():
    bath = ClassicalBath(1.0, 3.0)
    mod = EGPGeneralModulation((PiecewiseConstant.constant(1.5),))
    a = leakage_rates(bath, mod, 1.2)
    b = leakage_rates(bath, EGPModulation(1.5, 1), 1.2)
    assert a == pytest.approx(b, rel=1e-8)


def test_quadrature_failure_reported():
    class Divergent:
        def correlation(self, t):
            return (abs(t) + 1e-300) ** -1.5

        def singular_at_zero(self):
            return False

    with pytest.raises(QuadratureError) as exc:
        leakage_rates(Divergent(), NoModulation(), 1.0)
    assert exc.value.achieved is not None


def test_p0_zero_rates_constant():
    t, p0, p1 = p0_dynamics(0.0, 0.0, 0.7, 0.3, 5.0, 0.1)
    assert np.all(p0 == 0.7) and np.all(p1 == 0.3)


def test_p0_symmetric_rates_analytic():
    r = 0.8
    t, p0, p1 = p0_dynamics(r, r, 1.0, 0.0, 4.0, 0.01)
    assert np.allclose(p0, 0.5 + 0.5 * np.exp(-2 * r * t), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 1), st.floats(0.5, 10))
def test_p0_conservation(rp, rm, P0, horizon):
    t, p0, p1 = p0_dynamics(lambda s: rp * (1 + math.sin(s)), rm, P0, 1 - P0, horizon, 0.01)
    drift = np.abs(p0 + p1 - 1.0)
    assert np.all(drift <= 1e-9 * np.maximum(t, 1.0))


def test_p0_step_rejection_and_clamp():
    with pytest.raises(StepRejected):
        p0_dynamics(-5.0, -5.0, 1.0, 0.0, 1.0, 0.1)
    t, p0, p1 = p0_dynamics(-5.0, -5.0, 1.0, 0.0, 1.0, 0.1, clamp=True)
    assert p0.max() <= 1 and p1.min() >= 0
    with pytest.raises(ValueError):
        p0_dynamics(1.0, 1.0, 1.2, 0.0, 1.0, 0.1)


def test_p0_decay_slower_with_alpha():
    # 14 elementary errors leaving the codespace, Fig. 5 style bath
    finals = []
    for a in (1.0, 2.0, 4.0):
        def rp(t, a=a):
            return 14 * timedep_rate_ohmic(0.1, 3.0, 1.0, 2 * a, t, +1)

        def rm(t, a=a):
            return 14 * timedep_rate_ohmic(0.1, 3.0, 1.0, 2 * a, t, -1)

        _, p0, _ = p0_dynamics(rp, rm, 1.0, 0.0, 5.0, 0.01, clamp=True)
        finals.append(p0[-1])
    assert finals[0] < finals[1] < finals[2]
