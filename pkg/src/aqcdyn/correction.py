"""Classical master equation over correctable syndrome subspaces.

Populations evolve under dP/dt = G P where G is a sparse generator over the
correctable syndromes.  Transitions to uncorrectable patterns appear only as
diagonal loss, so the column sums of G are the (non-positive) leakage rates.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .baths import LorentzDrude, markov_rate, timedep_rate_ohmic
from .graph import SyndromeGraph

NEG_TOL = 1e-9
RATE_MODES = ("second_markov", "time_dependent")


class NumericalFailure(RuntimeError):
    pass


@dataclass
class CorrectionConfig:
    """Parameters of the correction dynamics.

    ``eps_bar`` is the mean logical energy, a constant or a callable of t
    (callables are only meaningful in ``time_dependent`` mode).
    ``reservoir`` is ``(K, T_R)`` with K a spectral density.  With
    ``conservation=True`` every syndrome is tracked as a plain node and no
    leakage is applied; this is a validation harness, not a physical model.
    """

    graph: SyndromeGraph
    alpha: float
    eps_bar: float | Callable[[float], float] = 0.0
    J: object = None
    T: float = 1.0
    reservoir: tuple | None = None
    rate_mode: str = "second_markov"
    conservation: bool = False
    K_max: int | None = None

    def __post_init__(self):
        if self.rate_mode not in RATE_MODES:
            raise ValueError(f"rate_mode must be one of {RATE_MODES}")
        if self.J is None:
            raise ValueError("a bath spectral density is required")
        if self.T <= 0:
            raise ValueError("temperature must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.reservoir is not None:
            if self.alpha == 0:
                raise ValueError("cooling without an energy penalty (alpha = 0) is ill-posed")
            if self.reservoir[1] <= 0:
                raise ValueError("reservoir temperature must be positive")
        if callable(self.eps_bar) and self.rate_mode == "second_markov":
            raise ValueError("second_markov mode needs a constant eps_bar")

    def eps(self, t: float = 0.0) -> float:
        return float(self.eps_bar(t)) if callable(self.eps_bar) else float(self.eps_bar)


def gamma_rate(config: CorrectionConfig, omega):
    """gamma(w) = 2 J(w)[n(w)+1] + 2 K(w)[m(w)+1] (reservoir term only if present)."""
    r = markov_rate(config.J, config.T, omega)
    if config.reservoir is not None:
        K, T_R = config.reservoir
        r = r + markov_rate(K, T_R, omega)
    return r


@dataclass
class RateMatrix:
    """Generator over ``states`` (syndrome integers, ascending).

    Constant generators are stored in ``G``.  Time-dependent generators are
    kept as frequency-grouped components and assembled by :meth:`at`.
    """

    states: list[int]
    G: sparse.csr_matrix | None
    leak: np.ndarray | None
    components: list = field(default_factory=list)
    rate_fn: Callable | None = None
    mode: str = "second_markov"

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def time_dependent(self) -> bool:
        return self.G is None

    def index(self, s: int) -> int:
        return self.states.index(s)

    def _pattern(self):
        # union sparsity of all components; data(t) = A @ rates(t)
        if not hasattr(self, "_pat"):
            n = self.dim
            rows, cols, comp, vals = [], [], [], []
            for k, (_, M) in enumerate(self.components):
                co = M.tocoo()
                rows.append(co.row)
                cols.append(co.col)
                vals.append(co.data)
                comp.append(np.full(co.nnz, k))
            cat = (lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=int))
            key = cat(rows).astype(np.int64) * n + cat(cols)
            uniq, inv = np.unique(key, return_inverse=True)
            A = sparse.csr_matrix((cat(vals).astype(float), (inv, cat(comp))),
                                  shape=(len(uniq), len(self.components)))
            r, c = uniq // n, uniq % n
            indptr = np.searchsorted(r, np.arange(n + 1))
            self._pat = (A, c.astype(np.int32), indptr.astype(np.int32), r != c)
        return self._pat

    def at(self, t: float) -> sparse.csr_matrix:
        if self.G is not None:
            return self.G
        A, indices, indptr, _ = self._pattern()
        r = np.array([self.rate_fn(key, t) for key, _ in self.components], dtype=float)
        return sparse.csr_matrix((A @ r, indices, indptr), shape=(self.dim, self.dim))

    def has_negative_rate(self, G: sparse.csr_matrix) -> bool:
        """True if an off-diagonal entry of ``G`` (as returned by :meth:`at`) is negative."""
        if self.G is None:
            return bool(np.any(G.data[self._pattern()[3]] < 0))
        co = G.tocoo()
        return bool(np.any(co.data[co.row != co.col] < 0))

    def leak_at(self, t: float) -> np.ndarray:
        return -np.asarray(self.at(t).sum(axis=0)).ravel()

    def max_entry(self, t: float = 0.0) -> float:
        G = self.at(t)
        return float(abs(G).max()) if G.nnz else 0.0


def _edge_list(config: CorrectionConfig):
    """Yield (source, target or None, varpi) for every transition that is tracked."""
    g = config.graph
    if config.conservation:
        syn = [g.code.syndrome_index(e) for e in g.model.errors]
        for s in range(g.code.num_syndromes):
            for j, sj in enumerate(syn):
                mu = s ^ sj
                yield s, mu, (sj & ~s).bit_count() - (sj & s).bit_count()
        return
    for e in g.edges:
        yield e.source, (e.target if e.correctable else None), e.varpi


def build_rate_matrix(config: CorrectionConfig) -> RateMatrix:
    """Assemble the generator.

    A correctable edge nu -> mu with w = 2 alpha varpi(j, nu) moves
    population at rate gamma(-w); an uncorrectable one removes it at
    gamma(-(w + eps_bar)).  In ``time_dependent`` mode the bath rates are
    r(-w, t) and r(-(w - eps_bar), t) and the reservoir rates
    r(-w, t) and r(-(w + eps_bar), t), the offsets following the printed
    rate definitions.
    """
    g = config.graph
    if g.table is None and not config.conservation:
        raise ValueError("graph carries no correctability classification")
    states = list(range(g.code.num_syndromes)) if config.conservation else g.correctable_nodes()
    pos = {s: i for i, s in enumerate(states)}
    n = len(states)
    a = config.alpha

    if config.rate_mode == "second_markov":
        rows, cols, vals = [], [], []
        leak = np.zeros(n)
        eps = config.eps()
        for s, mu, vp in _edge_list(config):
            i = pos[s]
            if mu is not None:
                r = float(gamma_rate(config, -2 * a * vp))
                rows += [pos[mu], i]
                cols += [i, i]
                vals += [r, -r]
            else:
                r = float(gamma_rate(config, -(2 * a * vp + eps)))
                rows.append(i)
                cols.append(i)
                vals.append(-r)
                leak[i] += r
        G = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        G.sum_duplicates()
        rm = RateMatrix(states, G, leak, mode="second_markov")
        _check_generator(rm)
        return rm

    # time-dependent: group edges by (channel, varpi) so G(t) = sum r(key, t) M_key
    if not isinstance(config.J, LorentzDrude):
        raise ValueError("time_dependent mode needs a Lorentz-Drude bath")
    channels = [("bath", config.J, config.T, -1.0)]
    if config.reservoir is not None:
        K, T_R = config.reservoir
        if not isinstance(K, LorentzDrude):
            raise ValueError("time_dependent mode needs a Lorentz-Drude reservoir")
        channels.append(("res", K, T_R, +1.0))
    parts: dict[tuple, list] = defaultdict(lambda: [[], [], []])
    for s, mu, vp in _edge_list(config):
        i = pos[s]
        for name, *_ in channels:
            key = (name, vp, mu is None)
            rr, cc, vv = parts[key]
            if mu is not None:
                rr += [pos[mu], i]
                cc += [i, i]
                vv += [1.0, -1.0]
            else:
                rr.append(i)
                cc.append(i)
                vv.append(-1.0)
    comps = []
    for key in sorted(parts):
        rr, cc, vv = parts[key]
        M = sparse.csr_matrix((vv, (rr, cc)), shape=(n, n))
        M.sum_duplicates()
        comps.append((key, M))
    chan = {c[0]: c for c in channels}
    cache: dict = {}

    def rate_fn(key, t):
        name, vp, unc = key
        ck = (key, t)
        if ck not in cache:
            _, Jc, Tc, sgn = chan[name]
            w = 2 * a * vp + (sgn * config.eps(t) if unc else 0.0)
            cache[ck] = timedep_rate_ohmic(Jc.E_R, Jc.gamma, Tc, -w, t, +1, config.K_max)
            if len(cache) > 4096:
                cache.clear()
                cache[ck] = timedep_rate_ohmic(Jc.E_R, Jc.gamma, Tc, -w, t, +1, config.K_max)
        return cache[ck]

    return RateMatrix(states, None, None, comps, rate_fn, mode="time_dependent")


def _check_generator(rm: RateMatrix, tol: float = 1e-12) -> None:
    G = rm.G.tocoo()
    off = G.row != G.col
    if np.any(G.data[off] < 0):
        raise NumericalFailure("negative off-diagonal generator entry")
    deficit = -np.asarray(rm.G.sum(axis=0)).ravel()
    scale = max(1.0, float(abs(rm.G).max()) if rm.G.nnz else 1.0)
    if np.any(deficit < -tol * scale) or not np.allclose(deficit, rm.leak, rtol=1e-10, atol=tol * scale):
        raise NumericalFailure("column deficits do not match leakage rates")
    if not np.all(np.isfinite(rm.G.data)):
        raise NumericalFailure("non-finite rates")


# --- effective reservoir -----------------------------------------------------


def effective_occupation(J, K, n, m):
    """n_eff = m + (J/K)(n - m) for spectral-density values J, K at one frequency."""
    if np.any(np.asarray(K) == 0):
        raise ZeroDivisionError("reservoir spectral density vanishes")
    return m + (J / K) * (n - m)


def effective_temperature(n_eff, omega):
    """T_eff = w / ln((n_eff + 1)/n_eff); returns 0.0 when n_eff <= 0."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if n_eff <= 0:
        return 0.0
    return omega / math.log1p(1.0 / n_eff)


def edge_effective_temperature(config: CorrectionConfig, omega: float) -> float:
    """Temperature at which gamma(-w)/gamma(w) = exp(-w/T) for the combined bath and reservoir."""
    from .baths import bose_einstein

    Jw = float(config.J(omega))
    n = bose_einstein(omega, config.T)
    if config.reservoir is None:
        return effective_temperature(n, omega)
    K, T_R = config.reservoir
    Kw = float(K(omega))
    m = bose_einstein(omega, T_R)
    return effective_temperature((Jw * n + Kw * m) / (Jw + Kw), omega)


# --- integration ------------------------------------------------------------


@dataclass
class Trajectory:
    t: np.ndarray
    P: np.ndarray  # shape (len(t), dim)
    states: list[int]
    diagnostics: dict

    @property
    def P_corr(self) -> np.ndarray:
        return self.P.sum(axis=1)


def initial_state(matrix: RateMatrix, syndrome: int = 0) -> np.ndarray:
    p = np.zeros(matrix.dim)
    p[matrix.index(syndrome)] = 1.0
    return p


def default_dt(matrix: RateMatrix, horizon: float) -> float:
    m = matrix.max_entry(horizon / 2 if matrix.time_dependent else 0.0)
    cands = [horizon / 1e4] if horizon > 0 else [1.0]
    if m > 0:
        cands.append(0.01 / m)
    return min(cands)


def integrate(matrix: RateMatrix, P0=None, horizon: float = 1.0, dt: float | None = None,
              method: str = "rk4", samples=None, clamp: bool = False) -> Trajectory:
    """Integrate dP/dt = G(t) P.

    ``method`` is ``"rk4"`` (fixed step) or ``"expm"`` (exact propagation with
    ``expm_multiply``, constant generators only).  ``samples`` are the output
    times (default: 201 points on [0, horizon]).  Populations below -1e-9 raise
    :class:`NumericalFailure` unless ``clamp`` is set.  Negative rates in
    time-dependent mode are recorded in the diagnostics.
    """
    P = initial_state(matrix) if P0 is None else np.asarray(P0, dtype=float).copy()
    if P.shape != (matrix.dim,):
        raise ValueError("state has wrong dimension")
    if np.any(P < -NEG_TOL) or P.sum() > 1 + NEG_TOL:
        raise ValueError("invalid population vector")
    samples = np.linspace(0.0, horizon, 201) if samples is None else np.asarray(samples, dtype=float)
    if np.any(np.diff(samples) < 0) or samples[0] < 0 or samples[-1] > horizon + 1e-12:
        raise ValueError("sample times must be sorted and lie in [0, horizon]")
    diag = {"method": method, "negative_rate_times": [], "min_population": float(P.min()), "steps": 0}

    if method == "expm":
        if matrix.time_dependent:
            raise ValueError("expm integration needs a constant generator")
        out = np.empty((len(samples), matrix.dim))
        cur, t_cur = P, 0.0
        G = matrix.G.tocsc()
        for k, ts in enumerate(samples):
            if ts > t_cur:
                cur = splinalg.expm_multiply(G * (ts - t_cur), cur)
                t_cur = ts
            out[k] = cur
        diag["min_population"] = float(out.min())
        if out.min() < -NEG_TOL and not clamp:
            raise NumericalFailure("negative population in matrix-exponential propagation")
        return Trajectory(samples, out, matrix.states, diag)
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")

    if dt is None:
        dt = default_dt(matrix, horizon)
    out = np.empty((len(samples), matrix.dim))
    k = 0
    t = 0.0
    while k < len(samples) and samples[k] <= 0:
        out[k] = P
        k += 1
    const = None if matrix.time_dependent else matrix.G
    while k < len(samples):
        h = min(dt, samples[k] - t)
        if const is not None:
            G1 = G2 = G3 = const
        else:
            G1, G2, G3 = matrix.at(t), matrix.at(t + h / 2), matrix.at(t + h)
            for tt, Gx in ((t, G1), (t + h / 2, G2), (t + h, G3)):
                if matrix.has_negative_rate(Gx):
                    diag["negative_rate_times"].append(tt)
        k1 = G1 @ P
        k2 = G2 @ (P + h / 2 * k1)
        k3 = G2 @ (P + h / 2 * k2)
        k4 = G3 @ (P + h * k3)
        P = P + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        diag["steps"] += 1
        if not np.all(np.isfinite(P)):
            raise NumericalFailure(f"non-finite population at t={t:.6g}")
        if P.min() < -NEG_TOL:
            if not clamp:
                raise NumericalFailure(f"population fell below -1e-9 at t={t:.6g}; reduce dt")
            P = np.clip(P, 0.0, None)
        diag["min_population"] = min(diag["min_population"], float(P.min()))
        if abs(t - samples[k]) <= 1e-12 * max(1.0, t):
            t = float(samples[k])
            while k < len(samples) and samples[k] <= t:
                out[k] = P
                k += 1
    return Trajectory(samples, out, matrix.states, diag)


def correctable_population(P) -> float:
    return float(np.sum(P))


def decay_constant(t, P_corr, t_min: float | None = None) -> float:
    """Rate k of the fit P_corr ~ A exp(-k t) over t >= t_min (default: second half)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(P_corr, dtype=float)
    if t_min is None:
        t_min = 0.5 * t[-1]
    m = (t >= t_min) & (y > 0)
    if m.sum() < 2:
        raise ValueError("not enough positive samples to fit")
    slope = np.polyfit(t[m], np.log(y[m]), 1)[0]
    return float(-slope)
