import math

import numpy as np
import pytest
from scipy.linalg import expm

from aqcdyn.baths import LorentzDrude, bose_einstein, markov_rate
from aqcdyn.codes import ErrorModel, classify, default_error_model, get_code
from aqcdyn.correction import (
    CorrectionConfig, NumericalFailure, build_rate_matrix, decay_constant, default_dt, edge_effective_temperature,
    effective_occupation, effective_temperature, gamma_rate, initial_state, integrate,
)
from aqcdyn.graph import build_graph

J3 = LorentzDrude(0.1, 3.0)


def graph_for(name, model=None, max_weight=2):
    code = get_code(name)
    model = default_error_model(code) if model is None else model
    return build_graph(code, model, classify(code, model, max_weight))


@pytest.fixture(scope="module")
def steane_graph():
    return graph_for("steane")


def test_config_validation(steane_graph):
    with pytest.raises(ValueError):
        CorrectionConfig(steane_graph, 0.0, J=J3, reservoir=(J3, 0.1))
    with pytest.raises(ValueError):
        CorrectionConfig(steane_graph, 1.0, eps_bar=lambda t: 0.1, J=J3)
    with pytest.raises(ValueError):
        CorrectionConfig(steane_graph, 1.0, J=J3, rate_mode="lindblad")
    with pytest.raises(ValueError):
        CorrectionConfig(steane_graph, 1.0)


def test_steane_fig3_generator(steane_graph):
    rm = build_rate_matrix(CorrectionConfig(steane_graph, 1.0, 0.05, J=J3, T=1.0))
    assert rm.dim == 64
    G = rm.G.toarray()
    off = G - np.diag(np.diag(G))
    assert np.all(off >= 0)
    deficit = -G.sum(axis=0)
    has_red = np.array([any(not e.correctable for e in steane_graph.out_edges(s)) for s in rm.states])
    assert has_red.any()
    assert np.all(deficit[has_red] > 0)
    assert np.allclose(deficit[~has_red], 0, atol=1e-14)
    assert np.allclose(deficit, rm.leak, rtol=1e-12, atol=1e-14)


def test_omega_assignment(steane_graph):
    a, eps = 1.3, 0.05
    cfg = CorrectionConfig(steane_graph, a, eps, J=J3, T=1.0)
    rm = build_rate_matrix(cfg)
    G = rm.G.toarray()
    for s in (0, 5, 17):
        loss = sum(markov_rate(J3, 1.0, -(2 * a * e.varpi + eps)) for e in steane_graph.out_edges(s) if not e.correctable)
        assert rm.leak[rm.index(s)] == pytest.approx(loss, rel=1e-13)
        for e in steane_graph.out_edges(s):
            if e.correctable:
                assert G[rm.index(e.target), rm.index(s)] == pytest.approx(markov_rate(J3, 1.0, -2 * a * e.varpi),
                                                                          rel=1e-13)


@pytest.mark.parametrize("reservoir", [None, (LorentzDrude(1.0, 3.0), 0.1)])
def test_edge_detailed_balance(steane_graph, reservoir):
    a = 1.1
    cfg = CorrectionConfig(steane_graph, a, 0.05, J=J3, T=1.0, reservoir=reservoir)
    G = build_rate_matrix(cfg).G.toarray()
    for e in steane_graph.edges:
        if not e.correctable or e.varpi == 0:
            continue
        w = 2 * a * e.varpi  # energy released going back along the reverse edge
        fwd, back = G[e.target, e.source], G[e.source, e.target]
        T_eff = edge_effective_temperature(cfg, abs(w))
        assert fwd / back == pytest.approx(math.exp(-w / T_eff), rel=1e-12)


def test_two_node_steady_state():
    code = get_code("bit_flip")
    model = ErrorModel.from_labels(3, ["X1"])
    g = build_graph(code, model, classify(code, model, 1))
    assert all(e.correctable for e in g.edges)
    a, T = 0.8, 1.0
    rm = build_rate_matrix(CorrectionConfig(g, a, 0.0, J=J3, T=T))
    tr = integrate(rm, horizon=200.0, method="expm", samples=[200.0])
    P = tr.P[-1]
    assert P[rm.index(1)] / P[rm.index(0)] == pytest.approx(math.exp(-2 * a / T), rel=1e-10)
    assert P.sum() == pytest.approx(1.0, abs=1e-12)


def test_bit_flip_oracle_equivalence():
    g = graph_for("bit_flip")
    rm = build_rate_matrix(CorrectionConfig(g, 0.7, 0.05, J=J3, T=1.0))
    assert rm.dim <= 4
    ts = np.linspace(0, 20, 41)
    tr = integrate(rm, horizon=20.0, samples=ts, method="rk4")
    G = rm.G.toarray()
    P0 = initial_state(rm)
    ref = np.array([expm(G * t) @ P0 for t in ts])
    assert np.max(np.abs(tr.P - ref)) < 1e-8
    tr2 = integrate(rm, horizon=20.0, samples=ts, method="expm")
    assert np.max(np.abs(tr2.P - ref)) < 1e-8


@pytest.mark.parametrize("name", ["bit_flip", "five_qubit", "steane"])
def test_conservation_mode(name):
    g = graph_for(name)
    rm = build_rate_matrix(CorrectionConfig(g, 0.9, 0.05, J=J3, T=1.0, conservation=True))
    assert rm.dim == g.code.num_syndromes
    tr = integrate(rm, horizon=30.0, samples=np.linspace(0, 30, 31))
    assert np.max(np.abs(tr.P.sum(axis=1) - 1.0)) < 1e-9


def test_zero_generator_constant():
    g = graph_for("bit_flip")
    rm = build_rate_matrix(CorrectionConfig(g, 1.0, 0.0, J=LorentzDrude(0.0, 3.0), T=1.0))
    tr = integrate(rm, horizon=5.0)
    assert np.all(tr.P == tr.P[0])


def test_monotone_p_corr_random_draws():
    rng = np.random.default_rng(11)
    graphs = [graph_for("bit_flip"), graph_for("five_qubit", max_weight=1)]
    for i in range(1000):
        g = graphs[i % 2]
        J = LorentzDrude(rng.uniform(0.01, 0.3), rng.uniform(0.5, 10))
        res = (LorentzDrude(rng.uniform(0.01, 1), rng.uniform(0.5, 10)), rng.uniform(0.05, 2)) if i % 3 == 0 else None
        cfg = CorrectionConfig(g, rng.uniform(0.05, 3), rng.uniform(-0.2, 0.2), J=J, T=rng.uniform(0.1, 3),
                               reservoir=res)
        h = rng.uniform(1, 50)
        tr = integrate(build_rate_matrix(cfg), horizon=h, method="expm", samples=np.linspace(0, h, 11))
        pc = tr.P_corr
        assert np.all(np.diff(pc) <= 1e-9)


def test_time_dependent_mode():
    g = graph_for("bit_flip")
    cfg = CorrectionConfig(g, 2.5, 0.0, J=J3, T=1.0, rate_mode="time_dependent")
    rm = build_rate_matrix(cfg)
    assert rm.time_dependent
    sm = build_rate_matrix(CorrectionConfig(g, 2.5, 0.0, J=J3, T=1.0))
    assert np.allclose(rm.at(80.0).toarray(), sm.G.toarray(), rtol=1e-6, atol=1e-12)
    assert rm.at(0.0).nnz == 0 or np.all(rm.at(0.0).toarray() == 0)
    tr = integrate(rm, horizon=2.0, dt=0.005, clamp=True)
    assert tr.diagnostics["negative_rate_times"]  # omega = 5 > gamma gives a negative transient
    with pytest.raises(ValueError):
        integrate(rm, horizon=1.0, method="expm")


def test_time_dependent_eps_callable():
    g = graph_for("bit_flip")
    cfg = CorrectionConfig(g, 1.0, lambda t: 0.05 * (1 + t), J=J3, T=1.0, rate_mode="time_dependent")
    tr = integrate(build_rate_matrix(cfg), horizon=2.0, dt=0.01)
    assert np.all(np.diff(tr.P_corr) <= 1e-9)


def test_negative_population_raises():
    g = graph_for("bit_flip")
    rm = build_rate_matrix(CorrectionConfig(g, 0.2, 0.0, J=LorentzDrude(0.3, 3.0), T=1.0))
    with pytest.raises(NumericalFailure):
        integrate(rm, horizon=100.0, dt=50.0, samples=[0.0, 100.0])


def test_default_dt_rule():
    g = graph_for("bit_flip")
    rm = build_rate_matrix(CorrectionConfig(g, 0.2, 0.0, J=J3, T=1.0))
    assert default_dt(rm, 10.0) == pytest.approx(min(0.01 / rm.max_entry(), 10.0 / 1e4))


def test_effective_reservoir():
    assert effective_occupation(0.0, 2.0, 0.7, 0.1) == 0.1
    assert effective_occupation(2.0, 2.0, 0.7, 0.1) == 0.7
    assert effective_occupation(0.1, 1.0, 1.0, 0.0) == pytest.approx(0.1)
    with pytest.raises(ZeroDivisionError):
        effective_occupation(1.0, 0.0, 1.0, 0.0)
    w, T = 1.7, 0.9
    assert effective_temperature(bose_einstein(w, T), w) == pytest.approx(T, rel=1e-13)
    assert effective_temperature(1e6, 1.0) / 1.0 == pytest.approx(1e6, rel=1e-5)
    assert effective_temperature(1e-12, 1.0) < 0.05
    assert effective_temperature(0.0, 1.0) == 0.0


def test_reservoir_cools(steane_graph):
    a = 1.0
    base = CorrectionConfig(steane_graph, a, 0.05, J=J3, T=1.0)
    K = LorentzDrude(2.0, 3.0)
    cold = CorrectionConfig(steane_graph, a, 0.05, J=J3, T=1.0, reservoir=(K, 0.05))
    w = 2 * a
    T_eff = edge_effective_temperature(cold, w)
    assert T_eff < 1.0
    down, up = float(gamma_rate(cold, w)), float(gamma_rate(cold, -w))
    assert down / up == pytest.approx(math.exp(w / T_eff), rel=1e-12)
    assert down / up > math.exp(w / 1.0)
    p_base = integrate(build_rate_matrix(base), horizon=100.0, method="expm").P_corr[-1]
    p_cold = integrate(build_rate_matrix(cold), horizon=100.0, method="expm").P_corr[-1]
    assert p_cold > p_base


def test_decay_constant_fit():
    t = np.linspace(0, 10, 50)
    assert decay_constant(t, 0.9 * np.exp(-0.3 * t)) == pytest.approx(0.3, rel=1e-12)


def test_uncorrectable_reachable_drains(steane_graph):
    rm = build_rate_matrix(CorrectionConfig(steane_graph, 0.2, 0.05, J=J3, T=1.0))
    tr = integrate(rm, horizon=1e4, method="expm", samples=[0.0, 1e4])
    assert tr.P_corr[0] == 1.0 and tr.P_corr[-1] < 1e-6
