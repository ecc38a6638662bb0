"""Modulation functions for EGP and DD control and codespace leakage rates."""

from __future__ import annotations

import bisect
import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

EPS_POP = 1e-9
QUAD_REL_TOL = 1e-9


class QuadratureError(RuntimeError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class StepRejected(RuntimeError):
    pass


# --- modulation functions -------------------------------------------------------


def m_egp(alpha, w, tau):
    """EGP modulation e^{2 i alpha w tau}."""
    tau = np.asarray(tau, dtype=float)
    out = np.exp(2j * alpha * w * tau)
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class DDSchedule:
    """Parity trace p(t) given by the times at which p flips.

    ``p(t)`` counts the flips at times <= t, starting from ``p0`` at t = 0.
    """

    flips: tuple[float, ...] = ()
    horizon: float = math.inf
    p0: int = 0

    def __post_init__(self):
        f = tuple(float(x) for x in self.flips)
        if any(b < a for a, b in zip(f, f[1:])) or any(x < 0 for x in f):
            raise ValueError("flip times must be non-negative and sorted")
        object.__setattr__(self, "flips", f)

    @classmethod
    def periodic(cls, period: float, horizon: float, offset: float | None = None) -> "DDSchedule":
        """Alternating parity flipping every ``period`` starting at ``offset`` (default ``period``)."""
        if period <= 0:
            raise ValueError("period must be positive")
        start = period if offset is None else offset
        n = int(math.floor((horizon - start) / period + 1e-12)) + 1 if horizon >= start else 0
        return cls(tuple(start + i * period for i in range(n)), horizon)

    def parity(self, t: float) -> int:
        return self.p0 + bisect.bisect_right(self.flips, t)

    def breakpoints(self, lo: float, hi: float) -> list[float]:
        return [x for x in self.flips if lo < x < hi]


def m_dd(schedule: DDSchedule, t, tau):
    """DD modulation (-1)^{p(t) - p(t - tau)}."""
    if tau < 0 or tau > t:
        raise ValueError("need 0 <= tau <= t")
    if t > schedule.horizon:
        raise ValueError("t lies beyond the schedule horizon")
    return -1 if (schedule.parity(t) - schedule.parity(t - tau)) % 2 else 1


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function: ``values[i]`` on [times[i], times[i+1])."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be non-empty and of equal length")
        if self.times[0] != 0 or any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must start at 0 and increase strictly")

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls((0.0,), (float(value),))

    def integral(self, t: float) -> float:
        """int_0^t f(s) ds."""
        acc = 0.0
        for i, (a, v) in enumerate(zip(self.times, self.values)):
            if a >= t:
                break
            b = self.times[i + 1] if i + 1 < len(self.times) else math.inf
            acc += v * (min(b, t) - a)
        return acc


def egp_phase(schedules, t, tau):
    """Accumulated phase 2 int_{t-tau}^{t} sum_m alpha_m(s) ds over the anticommuting generators."""
    if tau < 0 or tau > t:
        raise ValueError("need 0 <= tau <= t")
    return 2.0 * sum(s.integral(t) - s.integral(t - tau) for s in schedules)


def m_egp_general(schedules, t, tau):
    """General EGP modulation for time-dependent penalties alpha_m(t).

    ``schedules`` lists the penalty schedules of the generators that
    anticommute with the error.  Constant schedules reproduce ``m_egp``.
    """
    return cmath.exp(1j * egp_phase(schedules, t, tau))


# --- modulation handles for the rate engine ------------------------------------


@dataclass(frozen=True)
class EGPModulation:
    alpha: float
    w: int

    @property
    def omega(self) -> float:
        return 2.0 * self.alpha * self.w

    def __call__(self, t, tau):
        return m_egp(self.alpha, self.w, tau)


@dataclass(frozen=True)
class EGPGeneralModulation:
    schedules: tuple[PiecewiseConstant, ...]

    def __call__(self, t, tau):
        return m_egp_general(self.schedules, t, tau)

    def breakpoints(self, t):
        pts = {t - x for s in self.schedules for x in s.times if 0 < x < t}
        return sorted(p for p in pts if 0 < p < t)


@dataclass(frozen=True)
class DDModulation:
    schedule: DDSchedule

    def __call__(self, t, tau):
        return m_dd(self.schedule, t, tau)

    def breakpoints(self, t):
        return sorted(t - x for x in self.schedule.breakpoints(0.0, t))


@dataclass(frozen=True)
class NoModulation:
    def __call__(self, t, tau):
        return 1.0


def _quad(f, a, b, **kw):
    kw.setdefault("limit", 1000)
    kw.setdefault("epsrel", QUAD_REL_TOL)
    kw.setdefault("epsabs", 1e-15)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            kw["full_output"] = 0
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, a, b, **kw)
            raise QuadratureError(f"quadrature did not converge (achieved abs error {err:.3g}): {exc}", err) from None
    return val


def _segments(a, b, pts):
    edges = [a] + [p for p in pts if a < p < b] + [b]
    return list(zip(edges, edges[1:]))


def leakage_rates(bath, modulation, t):
    """Return ``(r_plus, r_minus)`` with r = 2 Re int_0^t C(tau) m(t,tau) dtau (m conjugated for r_minus).

    EGP integrals use oscillatory (QAWO) quadrature; DD and general EGP
    integrate piecewise between the modulation's breakpoints.  For real
    modulations a single integral is evaluated, so ``r_plus == r_minus``
    holds bit for bit.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 0.0, 0.0

    # an integrable log singularity at tau = 0 is sampled just off the endpoint
    floor = 1e-300 if getattr(bath, "singular_at_zero", lambda: False)() else 0.0

    def reC(tau):
        return float(np.real(bath.correlation(max(tau, floor))))

    def imC(tau):
        return float(np.imag(bath.correlation(max(tau, floor))))

    if isinstance(modulation, EGPModulation):
        w = modulation.omega
        if w == 0:
            r = 2.0 * _quad(reC, 0.0, t)
            return r, r
        c = _quad(reC, 0.0, t, weight="cos", wvar=w)
        s = _quad(imC, 0.0, t, weight="sin", wvar=w)
        # Re[C e^{+-i w tau}] = ReC cos(w tau) -+ ImC sin(w tau)
        return 2.0 * (c - s), 2.0 * (c + s)

    if isinstance(modulation, (DDModulation, NoModulation)):
        pts = modulation.breakpoints(t) if isinstance(modulation, DDModulation) else []
        r = 0.0
        for a, b in _segments(0.0, t, pts):
            sgn = modulation(t, 0.5 * (a + b))
            r += sgn * _quad(reC, a, b)
        r *= 2.0
        return r, r

    if isinstance(modulation, EGPGeneralModulation):
        pts = modulation.breakpoints(t)
        rp = rm = 0.0
        for a, b in _segments(0.0, t, pts):
            def cos_part(tau):
                return reC(tau) * math.cos(egp_phase(modulation.schedules, t, tau))

            def sin_part(tau):
                return imC(tau) * math.sin(egp_phase(modulation.schedules, t, tau))

            c = _quad(cos_part, a, b)
            s = _quad(sin_part, a, b)
            rp += c - s
            rm += c + s
        return 2.0 * rp, 2.0 * rm

    raise TypeError(f"unsupported modulation {modulation!r}")


# --- two-level codespace population dynamics -------------------------------------


def _as_fn(r):
    if callable(r):
        return r
    return lambda t: r


def p0_dynamics(r_plus, r_minus, P0, P1, horizon, dt, clamp=False):
    """Integrate dP0/dt = R+(t) P1 - R-(t) P0 and dP1/dt = -dP0/dt with fixed-step RK4.

    ``r_plus`` and ``r_minus`` are the summed rates over elementary errors,
    either constants or callables of t.  A step that pushes a population
    outside [-1e-9, 1 + 1e-9] raises :class:`StepRejected` unless ``clamp``
    is set, in which case populations are clipped to [0, 1].

    Returns arrays ``(t, P0, P1)``.
    """
    if not (0 <= P0 <= 1 and 0 <= P1 <= 1):
        raise ValueError("populations must lie in [0, 1]")
    if dt <= 0 or horizon < 0:
        raise ValueError("need dt > 0 and horizon >= 0")
    rp, rm = _as_fn(r_plus), _as_fn(r_minus)
    n = int(math.ceil(horizon / dt - 1e-12))
    ts = np.linspace(0.0, n * dt, n + 1)
    y = np.empty((n + 1, 2))
    y[0] = (P0, P1)

    def f(t, v):
        d = rp(t) * v[1] - rm(t) * v[0]
        return np.array([d, -d])

    for i in range(n):
        t, v = ts[i], y[i]
        k1 = f(t, v)
        k2 = f(t + dt / 2, v + dt / 2 * k1)
        k3 = f(t + dt / 2, v + dt / 2 * k2)
        k4 = f(t + dt, v + dt * k3)
        nv = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(nv < -EPS_POP) or np.any(nv > 1 + EPS_POP):
            if not clamp:
                raise StepRejected(f"population left [0, 1] at t={ts[i + 1]:.6g}; reduce dt")
            nv = np.clip(nv, 0.0, 1.0)
        y[i + 1] = nv
    return ts, y[:, 0], y[:, 1]
