"""Spectral densities, thermal occupations, bath correlation functions and rates.

Units: hbar = k_B = 1.  Energies and temperatures are angular frequencies in
MHz and times are in microseconds.  Positive frequency ``omega`` denotes the
downhill (emission) direction, so ``markov_rate(+w) > markov_rate(-w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, interpolate, special

OMEGA_TOL = 1e-9  # relative to gamma, for the omega -> 0 branch
MATSUBARA_REL_TOL = 1e-8


class ResonanceError(ValueError):
    """gamma coincides with a Matsubara frequency 2*pi*k*T."""


@dataclass(frozen=True)
class LorentzDrude:
    """Ohmic spectral density with Lorentz-Drude cutoff, J(w) = 2 E_R gamma w / (w^2 + gamma^2)."""

    E_R: float
    gamma: float

    def __post_init__(self):
        if self.E_R < 0 or self.gamma <= 0:
            raise ValueError("need E_R >= 0 and gamma > 0")

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = 2.0 * self.E_R * self.gamma * omega / (omega * omega + self.gamma ** 2)
        return out if out.ndim else float(out)

    def slope_at_zero(self) -> float:
        return 2.0 * self.E_R / self.gamma

    @property
    def scale(self) -> float:
        return self.gamma

    def to_dict(self) -> dict:
        return {"kind": "lorentz_drude", "E_R": self.E_R, "gamma": self.gamma}


class TabulatedSpectralDensity:
    """User supplied J(w) on w >= 0, linearly interpolated and extended as an odd function.

    Beyond the last tabulated frequency J is taken to vanish.
    """

    def __init__(self, omegas, values):
        w = np.asarray(omegas, dtype=float)
        v = np.asarray(values, dtype=float)
        if w.ndim != 1 or w.shape != v.shape or len(w) < 2:
            raise ValueError("need matching 1-d arrays with at least two points")
        if np.any(np.diff(w) <= 0) or w[0] < 0:
            raise ValueError("frequencies must be non-negative and strictly increasing")
        if w[0] > 0:
            w = np.concatenate([[0.0], w])
            v = np.concatenate([[0.0], v])
        elif v[0] != 0:
            raise ValueError("J(0) must vanish")
        self.omegas = w
        self.values = v
        self._interp = interpolate.interp1d(w, v, bounds_error=False, fill_value=0.0)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.sign(omega) * self._interp(np.abs(omega))
        return out if out.ndim else float(out)

    def slope_at_zero(self) -> float:
        return float((self.values[1] - self.values[0]) / (self.omegas[1] - self.omegas[0]))

    @property
    def scale(self) -> float:
        return float(self.omegas[-1])

    @property
    def cutoff(self) -> float:
        return float(self.omegas[-1])

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "omegas": self.omegas.tolist(), "values": self.values.tolist()}


def spectral_density_from_dict(d: dict):
    kind = d.get("kind", "lorentz_drude")
    if kind == "lorentz_drude":
        return LorentzDrude(float(d["E_R"]), float(d["gamma"]))
    if kind == "tabulated":
        return TabulatedSpectralDensity(d["omegas"], d["values"])
    raise ValueError(f"unknown spectral density kind {kind!r}")


def spectral_density(J, omega):
    return J(omega)


def bose_einstein(omega, T):
    """Occupation 1/(exp(omega/T) - 1); undefined at omega = 0."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    omega = np.asarray(omega, dtype=float)
    if np.any(omega == 0):
        raise ZeroDivisionError("bose_einstein is singular at omega = 0; use markov_rate")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(omega / T)
    return out if out.ndim else float(out)


def markov_rate(J, T, omega):
    """Second-Markov transition rate 2 J(w) [n(w) + 1].

    For |w| below ``OMEGA_TOL * scale`` the continuous limit 2 T J'(0) is used.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    omega = np.asarray(omega, dtype=float)
    tol = OMEGA_TOL * J.scale
    small = np.abs(omega) <= tol
    w = np.where(small, 1.0, omega)
    # 2 J(w) (n(w) + 1) = 2 J(w) / (1 - exp(-w/T)); -expm1 keeps precision near 0
    with np.errstate(over="ignore"):
        out = 2.0 * np.asarray(J(w)) / (-np.expm1(-w / T))
    out = np.where(small, 2.0 * T * J.slope_at_zero(), out)
    return out if out.ndim else float(out)


def log_markov_rate(J, T, omega):
    """Natural log of ``markov_rate``, safe for |omega|/T far beyond the float range of exp."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    omega = float(omega)
    if abs(omega) <= OMEGA_TOL * J.scale:
        return math.log(2.0 * T * J.slope_at_zero())
    y = abs(omega) / T
    logj = math.log(2.0 * abs(float(J(abs(omega)))))
    # |1 - e^{-y}| for emission, e^{y} - 1 for absorption
    if omega > 0:
        return logj - math.log(-math.expm1(-y))
    return logj - (y + math.log(-math.expm1(-y)))


def correlation_classical(A, gamma, t):
    t = np.asarray(t, dtype=float)
    out = A * np.exp(-gamma * t)
    return out if out.ndim else float(out)


def _check_resonance(gamma, T, K_max=None):
    x = gamma / (2 * math.pi * T)
    k = round(x)
    if k >= 1 and (K_max is None or k <= K_max) and abs(x - k) <= 1e-10 * max(1.0, x):
        raise ResonanceError(
            f"gamma = {gamma} equals Matsubara frequency nu_{k} = 2*pi*{k}*T; "
            f"perturb T slightly (e.g. T = {T * (1 + 1e-6):.10g})"
        )


def _cot(x):
    return math.cos(x) / math.sin(x)


def matsubara_coefficients(E_R, gamma, T, K):
    kappa = np.arange(1, K + 1, dtype=float)
    nu = 2 * math.pi * T * kappa
    return nu, 4.0 * E_R * gamma * T * nu / (nu * nu - gamma * gamma)


def correlation_quantum(E_R, gamma, T, t, K_max=None, rel_tol=MATSUBARA_REL_TOL):
    """Quantum correlation function of the Lorentz-Drude bath.

    ``C(t) = E_R gamma (cot(gamma/2T) - i) e^{-gamma t} + sum_k c_k e^{-nu_k t}``
    with ``c_k = 4 E_R gamma T nu_k / (nu_k^2 - gamma^2)`` and ``nu_k = 2 pi k T``.

    With ``K_max`` given the Matsubara sum is truncated there.  Otherwise the
    slowly converging 1/k part is summed in closed form (a logarithm) and the
    O(k^-3) remainder is truncated once its tail drops below ``rel_tol``
    relative to the leading term.  C diverges logarithmically at t = 0, so the
    default path requires t > 0.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    _check_resonance(gamma, T, K_max)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    lead = E_R * gamma * complex(_cot(gamma / (2 * T)), -1.0) * np.exp(-gamma * t)
    lead = np.asarray(lead, dtype=complex)
    if K_max is not None:
        nu, c = matsubara_coefficients(E_R, gamma, T, int(K_max))
        mats = (c[:, None] * np.exp(-np.outer(nu, t.ravel()))).sum(axis=0).reshape(t.shape)
    else:
        if np.any(t == 0):
            raise ValueError("C(0) diverges for the untruncated Matsubara sum; pass K_max or use t > 0")
        # sum_k (4 E_R gamma T / nu_k) e^{-nu_k t} = -(2 E_R gamma / pi) log(1 - e^{-2 pi T t})
        mats = -(2 * E_R * gamma / math.pi) * np.log(-np.expm1(-2 * math.pi * T * t))
        # remainder 4 E_R gamma T gamma^2 / (nu (nu^2 - gamma^2)) ~ k^-3; bound its tail
        a = 4 * E_R * gamma * T * gamma ** 2 / (2 * math.pi * T) ** 3
        K = max(int(2 * gamma / (2 * math.pi * T)) + 2, 8)
        scale = max(float(np.max(np.abs(lead))), 1e-300)
        while 2 * a / K ** 2 > rel_tol * max(scale, 4 * E_R * T / gamma) and K < 10 ** 7:
            K *= 2
        nu, _ = matsubara_coefficients(E_R, gamma, T, K)
        rem = 4 * E_R * gamma * T * gamma ** 2 / (nu * (nu * nu - gamma * gamma))
        mats = mats + (rem[:, None] * np.exp(-np.outer(nu, t.ravel()))).sum(axis=0).reshape(t.shape)
    out = np.asarray(lead + mats, dtype=complex)
    return out if out.ndim else complex(out)


def timedep_rate_classical(gamma, omega, t, sign=+1, A=1.0):
    """Rate 2 Re int_0^t A e^{-gamma tau} e^{+-i omega tau} dtau.

    Equal for both signs since the classical correlation is real.
    """
    del sign  # r+ = r- for a real correlation function
    t = np.asarray(t, dtype=float)
    e = np.exp(-gamma * t)
    out = 2.0 * A * (gamma - gamma * e * np.cos(omega * t) + omega * e * np.sin(omega * t)) / (
        omega * omega + gamma * gamma
    )
    return out if out.ndim else float(out)


def _sign(sign):
    if sign in (+1, "+", "plus"):
        return 1.0
    if sign in (-1, "-", "minus"):
        return -1.0
    raise ValueError(f"sign must be + or -, got {sign!r}")


def _matsubara_transient(E_R, gamma, T, w, t, rel_tol, k_cap=2 ** 20):
    """sum_k 2 c_k Re[e^{(i w - nu_k) t} / (nu_k - i w)] for t > 0, with an asymptotic tail."""
    base = 2 * math.pi * T
    # terms decay like e^{-base k t}/k^2; sum explicitly until negligible
    K = int(math.ceil(-math.log(rel_tol * 1e-3) / (base * t))) + int(2 * (gamma + abs(w)) / base) + 8
    K = min(K, k_cap)
    nu, c = matsubara_coefficients(E_R, gamma, T, K)
    e = np.exp(-nu * t)
    terms = 2 * c * e * (nu * math.cos(w * t) - w * math.sin(w * t)) / (nu * nu + w * w)
    total = math.fsum(terms)
    if K == k_cap:
        # leading large-k behaviour 8 E_R gamma T cos(wt) e^{-nu t}/nu^2; add sum_{k>K} via Li2
        z = math.exp(-base * t)
        kk = np.arange(1, K + 1, dtype=float)
        partial = math.fsum(np.exp(-base * t * kk) / kk ** 2)
        li2 = float(special.spence(1.0 - z))
        total += 8 * E_R * gamma * T / base ** 2 * math.cos(w * t) * (li2 - partial)
    return total


def timedep_rate_ohmic(E_R, gamma, T, omega, t, sign=+1, K_max=None, rel_tol=MATSUBARA_REL_TOL):
    """Time-dependent rate r^{+-}(t) = 2 Re int_0^t C(tau) e^{+-i omega tau} dtau for the Lorentz-Drude bath.

    ``omega`` is the transition frequency (2 alpha w_j for EGP).  With
    ``K_max`` the Matsubara sum is truncated; otherwise the infinite sum is
    used, whose long-time limit is exactly ``markov_rate(J, T, +-omega)``.
    Short-time values can be negative.
    """
    s = _sign(sign)
    _check_resonance(gamma, T, K_max)
    w = s * float(omega)
    x = gamma / (2 * T)
    A = E_R * gamma * complex(_cot(x), -1.0)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("t must be non-negative")
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        ph = np.exp(complex(-gamma, w) * ti)
        first = 2 * (A * (1 - ph) / complex(gamma, -w)).real
        if K_max is not None:
            nu, c = matsubara_coefficients(E_R, gamma, T, int(K_max))
            e = np.exp(-nu * ti)
            mats = 2 * c * (nu - e * (nu * math.cos(w * ti) - w * math.sin(w * ti))) / (nu * nu + w * w)
            out[i] = first + math.fsum(mats)
        elif ti == 0:
            out[i] = 0.0
        else:
            lim = markov_rate(LorentzDrude(E_R, gamma), T, w)
            tr_first = 2 * (A * ph / complex(gamma, -w)).real
            out[i] = lim - tr_first - _matsubara_transient(E_R, gamma, T, w, ti, rel_tol)
    if np.ndim(t) == 0:
        return float(out[0])
    return out


# --- bath handles used by the quadrature engine -------------------------------


@dataclass(frozen=True)
class ClassicalBath:
    """Real exponential correlation A e^{-gamma t}."""

    A: float
    gamma: float

    def correlation(self, t):
        return correlation_classical(self.A, self.gamma, t)

    def singular_at_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class OhmicBath:
    E_R: float
    gamma: float
    T: float
    K_max: int | None = None

    def __post_init__(self):
        _check_resonance(self.gamma, self.T, self.K_max)

    @property
    def J(self) -> LorentzDrude:
        return LorentzDrude(self.E_R, self.gamma)

    def correlation(self, t):
        return correlation_quantum(self.E_R, self.gamma, self.T, t, self.K_max)

    def singular_at_zero(self) -> bool:
        return self.K_max is None


class TabulatedBath:
    """Thermal bath defined by a tabulated spectral density.

    C(t) = (1/pi) int_0^wc J(w) [coth(w/2T) cos(wt) - i sin(wt)] dw.  The
    integrand is smooth on each tabulation segment, so Gauss-Legendre rules
    on sub-panels short enough to resolve the oscillation are used.
    """

    NODES = 16

    def __init__(self, J: TabulatedSpectralDensity, T: float):
        if T <= 0:
            raise ValueError("temperature must be positive")
        self.J = J
        self.T = T
        self._x, self._w = np.polynomial.legendre.leggauss(self.NODES)
        self._cache: dict = {}

    def _nodes(self, t):
        """Quadrature nodes and J-weighted weights for sub-panels of at most 2 rad phase at time t."""
        w0 = self.J.omegas
        d = np.diff(w0)
        m = np.maximum(1, np.ceil(d * t / 2.0)).astype(np.int64)
        key = m.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        seg = np.repeat(np.arange(len(d)), m)
        k = np.arange(m.sum()) - np.repeat(np.cumsum(m) - m, m)
        h = d[seg] / m[seg]
        a = w0[seg] + h * k
        w = (a[:, None] + 0.5 * h[:, None] * (self._x + 1.0)).ravel()
        wt = (0.5 * h[:, None] * self._w).ravel()
        Jw = np.asarray(self.J(w)) * wt / math.pi
        coth = 1.0 / np.tanh(w / (2 * self.T))  # nodes are interior, so w > 0
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = out = (w, Jw * coth, Jw)
        return out

    def _one(self, t: float) -> complex:
        w, re_wt, im_wt = self._nodes(t)
        wt = w * t
        return complex(re_wt @ np.cos(wt), -(im_wt @ np.sin(wt)))

    def correlation(self, t):
        if np.ndim(t) == 0:
            return self._one(float(t))
        return np.array([self._one(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))

    def singular_at_zero(self) -> bool:
        return False


def bath_from_dict(d: dict):
    kind = d.get("kind", "ohmic")
    if kind == "classical":
        return ClassicalBath(float(d.get("A", 1.0)), float(d["gamma"]))
    if kind == "ohmic":
        return OhmicBath(float(d["E_R"]), float(d["gamma"]), float(d["T"]), d.get("K_max"))
    if kind == "tabulated":
        return TabulatedBath(TabulatedSpectralDensity(d["omegas"], d["values"]), float(d["T"]))
    raise ValueError(f"unknown bath kind {kind!r}")
