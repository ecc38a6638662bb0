"""Thermal stability of the lumped error-weight chain.

Level w of the chain groups all syndrome subspaces whose error has weight w.
Levels 0..n_c-1 are transient and a forward step out of level n_c-1 is
absorbed (logical failure).  All sums are evaluated in log space because the
hitting times of realistic landscapes overflow double precision.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .baths import LorentzDrude, log_markov_rate

log = logging.getLogger(__name__)

STEP_CAP = 10 ** 9


class StabilityError(ValueError):
    pass


def log_binom(n, k):
    """log C(n, k).  Small k sums log(n - i) directly to avoid cancelling two huge gammaln values."""
    if np.ndim(n) == 0 and np.ndim(k) == 0 and 0 <= k <= 256 and k <= n:
        k = int(k)
        return math.fsum(np.log(float(n) - np.arange(k))) - math.lgamma(k + 1)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@dataclass(frozen=True)
class BirthDeathChain:
    """Discrete-time chain given directly by probabilities.

    ``p[w]`` (w = 0..n_c-1) is the forward and ``q[w]`` the backward
    probability per step of length ``dt``; ``q[0]`` is ignored.
    """

    p: tuple[float, ...]
    q: tuple[float, ...]
    dt: float = 1.0

    def __post_init__(self):
        if len(self.p) != len(self.q) or not self.p:
            raise StabilityError("p and q must be non-empty and of equal length")
        for w, (a, b) in enumerate(zip(self.p, self.q)):
            b = 0.0 if w == 0 else b
            if a < 0 or b < 0 or a + b > 1 + 1e-12:
                raise StabilityError(f"inadmissible probabilities at level {w}")

    @property
    def n_c(self) -> int:
        return len(self.p)

    def log_p(self):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.p, dtype=float))

    def log_q(self):
        q = np.asarray(self.q, dtype=float).copy()
        q[0] = 0.0
        with np.errstate(divide="ignore"):
            return np.log(q)


@dataclass(frozen=True)
class LumpedChain:
    """Birth-death chain over error weight with barriers ``Delta[w-1] = Delta_w``.

    Per-unit-time rates: up ``C(N_e,w)(N_e-w) r(-alpha Delta_{w+1})`` and down
    ``C(N_e,w) w r(alpha Delta_w)`` with r the second-Markov rate of the bath
    (``rates="markov"``) or the classical-limit pair (1, e^{-alpha Delta/T})
    (``rates="boltzmann"``).  ``dt`` turns rates into probabilities.
    """

    n_c: int
    N_e: int
    Delta: tuple[float, ...]
    alpha: float
    J: object
    T: float
    dt: float = 1.0
    rates: str = "markov"

    def __post_init__(self):
        if self.n_c < 1:
            raise StabilityError("n_c must be >= 1")
        if self.N_e <= self.n_c:
            raise StabilityError("need N_e > n_c")
        if len(self.Delta) < self.n_c:
            raise StabilityError(f"need {self.n_c} barrier steps, got {len(self.Delta)}")
        if self.T <= 0 or self.dt <= 0:
            raise StabilityError("T and dt must be positive")
        if self.rates not in ("markov", "boltzmann"):
            raise StabilityError("rates must be 'markov' or 'boltzmann'")
        object.__setattr__(self, "Delta", tuple(float(x) for x in self.Delta))

    @classmethod
    def constant(cls, n_c, N_e, Delta_bar, alpha, J, T, **kw) -> "LumpedChain":
        return cls(n_c, N_e, (float(Delta_bar),) * (n_c + 1), alpha, J, T, **kw)

    def barrier(self, w: int) -> float:
        """Delta_w for w >= 1; levels beyond the table reuse the last step."""
        return self.Delta[min(w, len(self.Delta)) - 1]

    def log_pi_up(self, w: int) -> float:
        x = self.alpha * self.barrier(w + 1)
        if self.rates == "boltzmann":
            return -x / self.T
        return log_markov_rate(self.J, self.T, -x)

    def log_pi_down(self, w: int) -> float:
        if self.rates == "boltzmann":
            return 0.0
        return log_markov_rate(self.J, self.T, self.alpha * self.barrier(w))

    def log_rate_p(self, w: int) -> float:
        """log of p_w / dt."""
        return float(log_binom(self.N_e, w) + math.log(self.N_e - w) + self.log_pi_up(w))

    def log_rate_q(self, w: int) -> float:
        if w == 0:
            return -math.inf
        return float(log_binom(self.N_e, w) + math.log(w) + self.log_pi_down(w))

    def max_dt(self) -> float:
        """Largest dt for which every p_w + q_w <= 1."""
        tot = [math.exp(np.logaddexp(self.log_rate_p(w), self.log_rate_q(w))) for w in range(self.n_c)]
        return 1.0 / max(tot)

    def admissible(self) -> bool:
        return self.dt <= self.max_dt()

    def with_dt(self, dt: float) -> "LumpedChain":
        return LumpedChain(self.n_c, self.N_e, self.Delta, self.alpha, self.J, self.T, dt, self.rates)

    def to_birth_death(self, dt: float | None = None) -> BirthDeathChain:
        dt = self.max_dt() * 0.9 if dt is None else dt
        p = tuple(dt * math.exp(self.log_rate_p(w)) for w in range(self.n_c))
        q = tuple(dt * math.exp(self.log_rate_q(w)) for w in range(self.n_c))
        return BirthDeathChain(p, q, dt)


def transition_probs(chain: LumpedChain, w: int) -> tuple[float, float]:
    """(p_w, q_w) for 0 <= w <= n_c, including the factor dt."""
    if not 0 <= w <= chain.n_c:
        raise IndexError(f"level {w} outside 0..{chain.n_c}")
    p = chain.dt * math.exp(chain.log_rate_p(w)) if w < chain.N_e else 0.0
    q = chain.dt * math.exp(chain.log_rate_q(w)) if w > 0 else 0.0
    return p, q


def _logs(chain):
    """log p_w and log q_w (dt included) for w = 0..n_c-1."""
    if isinstance(chain, BirthDeathChain):
        return chain.log_p(), chain.log_q(), chain.dt
    ld = math.log(chain.dt)
    lp = np.array([ld + chain.log_rate_p(w) for w in range(chain.n_c)])
    lq = np.array([ld + chain.log_rate_q(w) for w in range(chain.n_c)])
    return lp, lq, chain.dt


def log_level_times(chain) -> np.ndarray:
    """log of the expected time spent on each transient level before absorption."""
    lp, lq, dt = _logs(chain)
    if np.any(~np.isfinite(lp)):
        raise StabilityError("vanishing forward probability")
    n = len(lp)
    D = lq - lp  # log(q_m / p_m); -inf where q_m = 0
    out = np.empty(n)
    for i in range(n):
        # time on level i: sum over l <= i of exp(-log p_l + sum_{m=l+1}^{i} D_m)
        tail = np.concatenate([np.cumsum(D[i:0:-1])[::-1], [0.0]])  # sums over m = l+1..i for l = 0..i
        out[i] = math.log(dt) + logsumexp(-lp[: i + 1] + tail)
    return out


def log_hitting_time(chain) -> float:
    return float(logsumexp(log_level_times(chain)))


def hitting_time(chain) -> float:
    """Mean absorption time eta_0 from level 0 (may be ``inf`` if beyond float range)."""
    lt = log_hitting_time(chain)
    return math.exp(lt) if lt < 709 else math.inf


def _lam(chain: LumpedChain, Delta_bar: float) -> float:
    return chain.alpha * Delta_bar / chain.T


def log_pi_bar(chain: LumpedChain, Delta_bar: float) -> float:
    """log of j e^{-lambda}/(1 - e^{-lambda}) with j = 2 J(alpha Delta_bar)."""
    lam = _lam(chain, Delta_bar)
    j = 2.0 * float(chain.J(chain.alpha * Delta_bar))
    return math.log(j) - lam - math.log(-math.expm1(-lam))


def log_hitting_time_constant(chain: LumpedChain, Delta_bar: float) -> float:
    lam = _lam(chain, Delta_bar)
    if lam == 0 or chain.rates != "markov":
        return log_hitting_time(LumpedChain.constant(chain.n_c, chain.N_e, Delta_bar, chain.alpha,
                                                     chain.J, chain.T, rates=chain.rates))
    terms = []
    for k in range(1, chain.n_c + 1):
        for n in range(0, chain.n_c - k + 1):
            m = n + k
            terms.append(lam * n - log_binom(chain.N_e, m) - math.log(m))
    return float(logsumexp(terms)) - log_pi_bar(chain, Delta_bar)


def hitting_time_constant(chain: LumpedChain, Delta_bar: float) -> float:
    lt = log_hitting_time_constant(chain, Delta_bar)
    return math.exp(lt) if lt < 709 else math.inf


def _check_bound_pre(chain: LumpedChain, Delta_bar: float):
    if chain.N_e < 10 * chain.n_c:
        raise StabilityError(f"bound needs N_e >= 10 n_c (N_e={chain.N_e}, n_c={chain.n_c})")
    if _lam(chain, Delta_bar) <= 0:
        raise StabilityError("bound needs lambda > 0")


def log_hitting_bound(chain: LumpedChain, Delta_bar: float) -> float:
    """log of [1/(C(N_e,n_c) j)] [(e^{lambda(n_c+1)} + 1)/(n_c(1 - e^{-lambda})) - 1]."""
    _check_bound_pre(chain, Delta_bar)
    lam = _lam(chain, Delta_bar)
    nc = chain.n_c
    j = 2.0 * float(chain.J(chain.alpha * Delta_bar))
    A = np.logaddexp(lam * (nc + 1), 0.0) - math.log(nc) - math.log(-math.expm1(-lam))
    if A <= 0:
        raise StabilityError("bracket is non-positive; bound undefined")
    return float(A + math.log(-math.expm1(-A)) - log_binom(chain.N_e, nc) - math.log(j))


def hitting_bound(chain: LumpedChain, Delta_bar: float) -> float:
    lb = log_hitting_bound(chain, Delta_bar)
    return math.exp(lb) if lb < 709 else math.inf


def log_hitting_bound_derived(chain: LumpedChain, Delta_bar: float) -> float:
    """Bound obtained by replacing every C(N_e,n+k)(n+k) in the constant-barrier sum by C(N_e,n_c) n_c.

    Equals [e^{lambda(n_c+1)} - (n_c+1) e^lambda + n_c] / (j C(N_e,n_c) n_c (e^lambda - 1)).
    """
    _check_bound_pre(chain, Delta_bar)
    lam = _lam(chain, Delta_bar)
    nc = chain.n_c
    n = np.arange(nc)
    s = logsumexp(lam * n + np.log(nc - n))
    return float(s - log_pi_bar(chain, Delta_bar) - log_binom(chain.N_e, nc) - math.log(nc))


def binary_entropy(p: float) -> float:
    """H(p) in nats."""
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log1p(-p)


def log_bound_approx(chain: LumpedChain, Delta_bar: float) -> float:
    """lambda(n_c+1) - N_e H(n_c/N_e) - log j - log n_c, natural logarithms throughout."""
    lam = _lam(chain, Delta_bar)
    j = 2.0 * float(chain.J(chain.alpha * Delta_bar))
    return lam * (chain.n_c + 1) - chain.N_e * binary_entropy(chain.n_c / chain.N_e) - math.log(j) - math.log(chain.n_c)


@dataclass
class HittingTimeResult:
    log_eta0: float
    log_bound: float
    log_bound_derived: float
    log_approx: float
    log_level_times: np.ndarray = field(repr=False)

    @property
    def eta0(self) -> float:
        return math.exp(self.log_eta0) if self.log_eta0 < 709 else math.inf


def analyse(chain: LumpedChain, Delta_bar: float | None = None) -> HittingTimeResult:
    lt = log_level_times(chain)
    lb = lbd = la = math.nan
    if Delta_bar is not None:
        la = log_bound_approx(chain, Delta_bar)
        try:
            lb = log_hitting_bound(chain, Delta_bar)
            lbd = log_hitting_bound_derived(chain, Delta_bar)
        except StabilityError as exc:
            log.debug("bound skipped: %s", exc)
    return HittingTimeResult(float(logsumexp(lt)), lb, lbd, la, lt)


# --- Monte Carlo oracle -------------------------------------------------------


@dataclass
class MCResult:
    mean: float
    std_error: float
    trials: int
    partial: bool
    completed: int


def mc_hitting_oracle(chain, trials: int, seed: int, block: int = 1000, step_cap: int = STEP_CAP) -> MCResult:
    """Simulate the discrete-time chain from level 0 until absorption.

    Holding times are drawn as geometric numbers of steps and jumps from the
    embedded chain, vectorised over trials.  Each block of trials draws from
    its own Philox stream spawned from ``seed``, so results do not depend on
    execution order.  Trials exceeding ``step_cap`` steps are dropped and the
    result is flagged partial.
    """
    if trials < 1000:
        raise StabilityError("use at least 1000 trials")
    bd = chain if isinstance(chain, BirthDeathChain) else chain.to_birth_death()
    p = np.asarray(bd.p, dtype=float)
    q = np.asarray(bd.q, dtype=float).copy()
    q[0] = 0.0
    if np.any(p <= 0):
        raise StabilityError("vanishing forward probability")
    leave = p + q
    up = p / leave
    nc = bd.n_c
    children = np.random.SeedSequence(seed).spawn((trials + block - 1) // block)
    steps_all = []
    partial = False
    for b, ss in enumerate(children):
        m = min(block, trials - b * block)
        rng = np.random.Generator(np.random.Philox(ss))
        w = np.zeros(m, dtype=np.int64)
        steps = np.zeros(m, dtype=np.int64)
        alive = np.ones(m, dtype=bool)
        while alive.any():
            idx = np.nonzero(alive)[0]
            lw = w[idx]
            steps[idx] += rng.geometric(leave[lw])
            go_up = rng.random(len(idx)) < up[lw]
            w[idx] = lw + np.where(go_up, 1, -1)
            done = w[idx] >= nc
            over = steps[idx] > step_cap
            alive[idx[done | over]] = False
            if np.any(over & ~done):
                partial = True
                steps[idx[over & ~done]] = -1
        steps_all.append(steps)
    s = np.concatenate(steps_all)
    ok = s >= 0
    x = s[ok].astype(float) * bd.dt
    if len(x) < 2:
        return MCResult(math.nan, math.nan, trials, True, int(ok.sum()))
    return MCResult(float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))), trials, partial, int(ok.sum()))


# --- concatenated codes and scans ---------------------------------------------

# n_c values quoted for worked examples, keyed by (n, k, d, level)
WORKED_N_C = {(7, 1, 3, 4): 20}


@dataclass(frozen=True)
class ConcatenatedCodeParams:
    n: int = 7
    k: int = 1
    d: int = 3
    level: int = 4
    kinds: int = 2  # elementary error types per physical qubit
    n_c_convention: str = "paper"

    def __post_init__(self):
        if self.n_c_convention not in ("paper", "formula"):
            raise StabilityError("n_c_convention must be 'paper' or 'formula'")

    @property
    def n_c(self) -> int:
        formula = (self.d ** self.level - 1) // 2
        if self.n_c_convention == "paper":
            return WORKED_N_C.get((self.n, self.k, self.d, self.level), formula)
        return formula

    def N_e(self, n_l: int) -> int:
        return self.kinds * self.n ** self.level * n_l


SCALINGS = {
    "log": np.log,
    "sqrt": np.sqrt,
    "linear": lambda x: np.asarray(x, dtype=float),
}


def delta_bar(scaling: str, n_l):
    if scaling not in SCALINGS:
        raise StabilityError(f"unknown barrier scaling {scaling!r}")
    return float(SCALINGS[scaling](float(n_l)))


def _scan_point(args):
    params, scaling, alpha, T, n_l, J = args
    D = delta_bar(scaling, n_l)
    chain = LumpedChain.constant(params.n_c, params.N_e(n_l), D, alpha, J, T)
    r = analyse(chain, D if D > 0 else None)
    return {
        "n_l": n_l, "alpha": alpha, "T": T, "Delta_bar": D, "lambda": alpha * D / T,
        "N_e": chain.N_e, "n_c": chain.n_c,
        "log_eta0": r.log_eta0, "log_eta_bound": r.log_bound,
        "log_eta_bound_derived": r.log_bound_derived, "log_approx": r.log_approx,
    }


def scan(params: ConcatenatedCodeParams, scaling: str, alphas, T_list, n_l_list,
         J=None, threads: int = 1) -> list[dict]:
    """Grid of hitting-time results, ordered by (alpha, T, n_l) regardless of ``threads``."""
    J = LorentzDrude(0.1, 200.0) if J is None else J
    if np.isscalar(alphas):
        alphas = [alphas]
    grid = [(params, scaling, float(a), float(T), int(n), J) for a in alphas for T in T_list for n in n_l_list]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_scan_point, grid))
    return [_scan_point(g) for g in grid]


def window_slope(x, y, lo, hi) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = (x >= lo) & (x <= hi)
    if m.sum() < 2:
        raise StabilityError("window holds fewer than two points")
    return float(np.polyfit(x[m], y[m], 1)[0])


def slope_ratios(n_l, log_eta, windows=((100, 300), (300, 1000))) -> dict[str, float]:
    """For each scaling class f, ratio of the fitted slopes of log eta vs f(n_l) in the late and early windows.

    A ratio near 1 means log eta grows linearly in f(n_l) over that range.
    """
    (a, b), (c, d) = windows
    n = np.asarray(n_l, dtype=float)
    out = {}
    for name, f in SCALINGS.items():
        x = f(n)
        s1 = window_slope(x[(n >= a) & (n <= b)], np.asarray(log_eta)[(n >= a) & (n <= b)], -np.inf, np.inf)
        s2 = window_slope(x[(n >= c) & (n <= d)], np.asarray(log_eta)[(n >= c) & (n <= d)], -np.inf, np.inf)
        out[name] = s2 / s1
    return out


def slope_class(n_l, log_eta, windows=((100, 300), (300, 1000))) -> tuple[str, float]:
    """Scaling class whose slope ratio is closest to 1, with that ratio."""
    r = slope_ratios(n_l, log_eta, windows)
    name = min(r, key=lambda k: abs(r[k] - 1))
    return name, r[name]


def crossover_alpha(params: ConcatenatedCodeParams, T: float, alphas, n_l_window=(10, 100),
                    J=None, scaling: str = "log", points: int = 12) -> float:
    """Penalty scale at which d log(eta0) / d log(n_l) over ``n_l_window`` changes sign.

    Linear interpolation between the bracketing grid values of ``alphas``;
    ``nan`` if no sign change occurs.
    """
    J = LorentzDrude(0.1, 200.0) if J is None else J
    n_l = np.unique(np.round(np.geomspace(n_l_window[0], n_l_window[1], points)).astype(int))
    slopes = []
    for a in alphas:
        rows = scan(params, scaling, a, [T], n_l, J)
        y = [r["log_eta0"] for r in rows]
        slopes.append(float(np.polyfit(np.log(n_l), y, 1)[0]))
    for (a0, s0), (a1, s1) in zip(zip(alphas, slopes), zip(alphas[1:], slopes[1:])):
        if s0 <= 0 < s1 or s0 < 0 <= s1:
            return float(a0 + (a1 - a0) * (-s0) / (s1 - s0))
    return math.nan
