import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from aqcdyn.baths import (
    ClassicalBath, LorentzDrude, OhmicBath, ResonanceError, TabulatedBath, TabulatedSpectralDensity,
    bath_from_dict, bose_einstein, correlation_classical, correlation_quantum, log_markov_rate, markov_rate,
    timedep_rate_classical, timedep_rate_ohmic,
)

LD = LorentzDrude(0.1, 3.0)


def test_lorentz_drude_examples():
    assert LD(0.0) == 0.0
    assert LD(3.0) == pytest.approx(0.1, rel=1e-15)
    assert LD(2.0) == pytest.approx(2 * 0.1 * 3 * 2 / 13, rel=1e-15)
    assert LD(2.0) == pytest.approx(0.0923, abs=1e-4)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_spectral_antisymmetry(w):
    assert LD(w) + LD(-w) == 0.0
    tab = TabulatedSpectralDensity(np.linspace(0, 50, 101), LD(np.linspace(0, 50, 101)))
    assert tab(w) + tab(-w) == 0.0


def test_bose_einstein():
    assert bose_einstein(1.0, 1.0) == pytest.approx(1 / (math.e - 1), rel=1e-14)
    assert bose_einstein(1.0, 1.0) == pytest.approx(0.5820, abs=1e-4)
    assert bose_einstein(800.0, 1.0) < 1e-300
    for w in (0.1, 1.0, 7.0):
        assert bose_einstein(-w, 1.3) + bose_einstein(w, 1.3) + 1 == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ZeroDivisionError):
        bose_einstein(0.0, 1.0)


@settings(max_examples=200)
@given(st.floats(1e-3, 50.0), st.floats(0.05, 20.0))
def test_kms_detailed_balance(w, T):
    J = LorentzDrude(0.1, 3.0)
    ratio = markov_rate(J, T, -w) / markov_rate(J, T, w)
    assert ratio == pytest.approx(math.exp(-w / T), rel=1e-12)


@pytest.mark.parametrize("mult", [0.5, 1.0, 5.0])
def test_kms_examples(mult):
    T = 1.7
    w = mult * T
    assert markov_rate(LD, T, -w) / markov_rate(LD, T, w) == pytest.approx(math.exp(-w / T), rel=1e-12)


def test_markov_continuity_at_zero():
    lim = 4 * 0.1 * 1.0 / 3.0
    assert markov_rate(LD, 1.0, 0.0) == pytest.approx(lim, rel=1e-15)
    for w in (1e-6, -1e-6, 1e-4, -1e-4):
        assert markov_rate(LD, 1.0, w) == pytest.approx(lim, rel=1e-4)


def test_markov_positive():
    for w in np.linspace(-30, 30, 121):
        assert markov_rate(LD, 0.7, w) > 0


def test_markov_high_precision_fig6_point():
    E_R, g, T, w = 0.1, 200.0, 0.5, 3 * math.log(4)
    with mp.workdps(40):
        J = 2 * mp.mpf(E_R) * g * w / (mp.mpf(w) ** 2 + g ** 2)
        ref = 2 * J / (1 - mp.e ** (-mp.mpf(w) / T))
    assert markov_rate(LorentzDrude(E_R, g), T, w) == pytest.approx(float(ref), rel=1e-14)
    assert log_markov_rate(LorentzDrude(E_R, g), T, -w) == pytest.approx(float(mp.log(ref) - w / T), rel=1e-13)


def test_log_markov_rate_extreme():
    J = LorentzDrude(0.1, 200.0)
    assert math.isfinite(log_markov_rate(J, 0.5, -5000.0))
    assert log_markov_rate(J, 0.5, -3.0) == pytest.approx(math.log(markov_rate(J, 0.5, -3.0)), rel=1e-12)


def test_correlation_classical():
    assert correlation_classical(2.0, 3.0, 0.0) == 2.0
    assert correlation_classical(2.0, 3.0, 1 / 3) == pytest.approx(2 / math.e)
    v = correlation_classical(1.0, 3.0, np.linspace(0, 5, 50))
    assert np.all(np.diff(v) < 0)


def test_correlation_quantum_properties():
    t = np.array([0.05, 0.3, 1.0])
    a = correlation_quantum(0.1, 3.0, 1.0, t, K_max=3)
    b = correlation_quantum(0.1, 3.0, 1.0, t, K_max=30)
    c = correlation_quantum(0.1, 3.0, 1.0, t)
    assert np.array_equal(a.imag, b.imag) and np.allclose(c.imag, b.imag, rtol=0, atol=1e-15)
    assert abs(correlation_quantum(0.1, 3.0, 1.0, 40.0)) < 1e-12
    with pytest.raises(ValueError):
        correlation_quantum(0.1, 3.0, 1.0, 0.0)


def test_correlation_truncation_self_consistency():
    # C(0) diverges logarithmically in K_max, so self-consistency is checked at t > 0
    t = 0.1
    k1 = correlation_quantum(0.1, 3.0, 1.0, t, K_max=60)
    k2 = correlation_quantum(0.1, 3.0, 1.0, t, K_max=120)
    full = correlation_quantum(0.1, 3.0, 1.0, t)
    assert abs(k1 - k2) <= 1e-8 * abs(k2)
    assert abs(full - k2) <= 1e-8 * abs(k2)


def test_resonance():
    with pytest.raises(ResonanceError, match="T"):
        correlation_quantum(0.1, 2 * math.pi, 1.0, 0.5)
    with pytest.raises(ResonanceError):
        timedep_rate_ohmic(0.1, 4 * math.pi, 1.0, 1.0, 0.5)


def test_timedep_classical():
    g = 3.0
    t = np.linspace(0, 4, 30)
    assert np.allclose(timedep_rate_classical(g, 0.0, t), 2 * (1 - np.exp(-g * t)) / g, rtol=1e-14, atol=0)
    assert timedep_rate_classical(g, 2.0, 80.0) == pytest.approx(2 * g / (4 + g * g), rel=1e-14)
    assert timedep_rate_classical(g, 2.0, 1.0, +1) == timedep_rate_classical(g, 2.0, 1.0, -1)
    large = [timedep_rate_classical(g, w, 50.0) for w in np.linspace(0, 10, 21)]
    assert np.all(np.diff(large) < 0)


def test_timedep_classical_symbolic():
    import sympy as sp

    g, w, t, tau = sp.symbols("gamma omega t tau", positive=True)
    integral = sp.integrate(sp.exp((-g + sp.I * w) * tau), (tau, 0, t), conds="none")
    f = sp.lambdify((g, w, t), 2 * sp.re(sp.expand_complex(integral)), "math")
    for gv, wv, tv in ((3.0, 2.0, 0.7), (1.0, 5.0, 2.0), (0.5, 0.1, 9.0)):
        assert timedep_rate_classical(gv, wv, tv) == pytest.approx(f(gv, wv, tv), rel=1e-12)


def _quad_rate(E_R, g, T, w, t, sign):
    def f(tau):
        c = correlation_quantum(E_R, g, T, max(tau, 1e-300))
        return (c * complex(math.cos(w * tau), sign * math.sin(w * tau))).real

    # log singularity at 0: split off a short first panel
    a = min(t, 1e-3)
    v1 = integrate.quad(f, 0, a, epsabs=0, epsrel=1e-12, limit=400)[0]
    v2 = integrate.quad(f, a, t, epsabs=0, epsrel=1e-12, limit=400)[0] if t > a else 0.0
    return 2 * (v1 + v2)


@pytest.mark.parametrize("w", [0.5, 2.0, 6.0])
@pytest.mark.parametrize("t", [0.05, 0.5, 2.0, 5.0])
def test_timedep_ohmic_matches_quadrature(w, t):
    for sign in (+1, -1):
        exact = timedep_rate_ohmic(0.1, 3.0, 1.0, w, t, sign)
        ref = _quad_rate(0.1, 3.0, 1.0, w, t, sign)
        assert exact == pytest.approx(ref, rel=1e-6)


def test_timedep_ohmic_long_time_limit_and_transient():
    for a in (1.0, 2.0, 4.0):
        w = 2 * a
        for s in (+1, -1):
            late = timedep_rate_ohmic(0.1, 3.0, 1.0, w, 60.0, s)
            assert late == pytest.approx(markov_rate(LD, 1.0, s * w), rel=1e-6)
        ts = np.linspace(1e-3, 3.0, 600)
        neg = np.any(timedep_rate_ohmic(0.1, 3.0, 1.0, w, ts, -1) < 0)
        assert neg == (w > 3.0)
    assert timedep_rate_ohmic(0.1, 3.0, 1.0, 2.0, 0.0) == 0.0


def test_timedep_ohmic_truncated_converges():
    # Matsubara terms of the rate fall off as 1/K^2, so the truncation error shrinks as 1/K
    full = timedep_rate_ohmic(0.1, 3.0, 1.0, 2.0, 0.5, -1)
    e1 = abs(timedep_rate_ohmic(0.1, 3.0, 1.0, 2.0, 0.5, -1, K_max=1000) - full)
    e4 = abs(timedep_rate_ohmic(0.1, 3.0, 1.0, 2.0, 0.5, -1, K_max=4000) - full)
    assert e4 < 1e-3 * abs(full)
    assert 3.5 < e1 / e4 < 4.5


def test_bath_handles():
    ob = bath_from_dict({"kind": "ohmic", "E_R": 0.1, "gamma": 3.0, "T": 1.0})
    assert isinstance(ob, OhmicBath) and ob.singular_at_zero()
    cb = bath_from_dict({"kind": "classical", "A": 2.0, "gamma": 3.0})
    assert isinstance(cb, ClassicalBath) and cb.correlation(0.0) == 2.0
    with pytest.raises(ValueError):
        bath_from_dict({"kind": "spin"})


def test_tabulated_bath_tracks_ohmic():
    om = np.linspace(0, 3000, 30001)
    tb = TabulatedBath(TabulatedSpectralDensity(om, LD(om)), 1.0)
    for t in (0.2, 0.5, 1.5):
        ref = correlation_quantum(0.1, 3.0, 1.0, t)
        # dropping J beyond the cutoff L costs about (2 E_R gamma / pi) / (L t) in Im C
        assert abs(tb.correlation(t) - ref) < 2 * 0.6 / (math.pi * 3000 * t)
