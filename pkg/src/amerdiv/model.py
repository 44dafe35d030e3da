"""Market model, coefficient curves and time transforms.

The asset follows dS = [a(t) S - b(t)] dt + sigma(t) S dW with
a(t) = r(t) - q(t) minus proportional-dividend impulses d_i at t_i, and
b(t) carrying cash-dividend impulses D_j at T_j.  Every solver in the
package consumes coefficients through this module, either in calendar
time t or through one of the two deformed-time conventions:

* backward:  tau(t) = 1/2 * int_t^T sigma^2(k) dk   (European price, boundary)
* forward:   taubar(t) = 1/2 * int_0^t sigma^2(k) dk  (transition density)

Dirac impulses are never evaluated pointwise; they appear only as jump
terms in the integrated quantities (rho, alpha, alphabar, ...).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

__all__ = [
    "MarketModel",
    "OptionSpec",
    "TimeMap",
    "RegularizationWarning",
]


class RegularizationWarning(UserWarning):
    """Emitted when the mean-reversion positivity condition fails."""


def _exp_curve(c0: float, c1: float, ck: float):
    """Three-parameter curve c(t) = c0 * exp(-ck * t) + c1."""

    def f(t):
        return c0 * np.exp(-ck * np.asarray(t, dtype=float)) + c1

    return f


@dataclass(frozen=True)
class MarketModel:
    """Coefficient curves r, q, sigma plus discrete dividend schedules.

    Curves are the exponential parametrization c(t) = c0 e^{-ck t} + c1.
    Tabulated overrides (pairs of arrays) may be supplied instead; they are
    interpolated with a monotone cubic.
    """

    r0: float = 0.0
    r1: float = 0.0
    rk: float = 0.0
    q0: float = 0.0
    q1: float = 0.0
    qk: float = 0.0
    s0: float = 0.2
    s1: float = 0.0
    sk: float = 0.0
    cash_divs: tuple = ()          # ((T_j, D_j), ...)
    prop_divs: tuple = ()          # ((t_i, d_i), ...)
    r_tab: tuple | None = None     # optional (t_array, values) override
    q_tab: tuple | None = None
    sigma_tab: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "cash_divs",
                           tuple((float(t), float(d)) for t, d in self.cash_divs))
        object.__setattr__(self, "prop_divs",
                           tuple((float(t), float(d)) for t, d in self.prop_divs))
        for name, sched in (("cash_divs", self.cash_divs),
                            ("prop_divs", self.prop_divs)):
            times = [t for t, _ in sched]
            if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
                raise ValueError(f"{name}: ex-dates must be strictly increasing")
        if any(d < 0 for _, d in self.cash_divs):
            raise ValueError("cash dividend amounts must be >= 0")
        if any(not 0.0 <= d < 1.0 for _, d in self.prop_divs):
            raise ValueError("proportional dividends must lie in [0, 1)")

    # -- pointwise curves (continuous parts only) --------------------------
    def r(self, t):
        if self.r_tab is not None:
            return PchipInterpolator(*self.r_tab)(t)
        return _exp_curve(self.r0, self.r1, self.rk)(t)

    def q(self, t):
        if self.q_tab is not None:
            return PchipInterpolator(*self.q_tab)(t)
        return _exp_curve(self.q0, self.q1, self.qk)(t)

    def sigma(self, t):
        if self.sigma_tab is not None:
            return PchipInterpolator(*self.sigma_tab)(t)
        return _exp_curve(self.s0, self.s1, self.sk)(t)

    def a_cont(self, t):
        """Continuous part of the drift coefficient, r(t) - q(t)."""
        return self.r(t) - self.q(t)

    def validate(self, T: float) -> None:
        """Check schedule placement and curve positivity on [0, T]."""
        for name, sched in (("cash_divs", self.cash_divs),
                            ("prop_divs", self.prop_divs)):
            if any(not 0.0 < t < T for t, _ in sched):
                raise ValueError(f"{name}: ex-dates must lie strictly inside (0, T)")
        tt = np.linspace(0.0, T, 257)
        if np.any(self.sigma(tt) <= 0.0):
            raise ValueError("sigma(t) must be positive on [0, T]")

    @classmethod
    def from_dict(cls, d: dict) -> "MarketModel":
        """Build from config keys (sigma0/sigma1/sigmak aliases accepted)."""
        d = dict(d)
        for alias, name in (("sigma0", "s0"), ("sigma1", "s1"), ("sigmak", "sk")):
            if alias in d:
                d[name] = d.pop(alias)
        known = {"r0", "r1", "rk", "q0", "q1", "qk", "s0", "s1", "sk",
                 "cash_divs", "prop_divs", "r_tab", "q_tab", "sigma_tab"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class OptionSpec:
    kind: str            # "Put" | "Call"
    strike: float
    maturity: float
    spot: float

    def __post_init__(self):
        if self.kind not in ("Put", "Call"):
            raise ValueError("kind must be 'Put' or 'Call'")
        if min(self.strike, self.maturity, self.spot) <= 0:
            raise ValueError("strike, maturity and spot must be positive")

    @property
    def is_put(self) -> bool:
        return self.kind == "Put"


class TimeMap:
    """Tabulated time transforms and coefficient integrals on [0, T].

    Backward convention: tau(t) = 1/2 int_t^T sigma^2, so tau(T) = 0 and
    tau grows toward tau_max = tau(0) as t decreases.  All of rho, rbar,
    alpha, beta below are functions of backward tau.  Forward-convention
    quantities for the density (taubar, alphabar) are exposed separately.
    """

    def __init__(self, model: MarketModel, T: float, n: int = 4097,
                 spot: float | None = None):
        model.validate(T)
        self._spot = spot
        self.model = model
        self.T = float(T)
        t = np.linspace(0.0, self.T, n)
        self._t = t
        sig2 = np.asarray(model.sigma(t), dtype=float) ** 2
        r = np.asarray(model.r(t), dtype=float)
        a = np.asarray(model.a_cont(t), dtype=float)

        self._I_sig2 = cumulative_trapezoid(sig2, t, initial=0.0)   # int_0^t sigma^2
        self._I_r = cumulative_trapezoid(r, t, initial=0.0)         # int_0^t r
        self._I_a = cumulative_trapezoid(a, t, initial=0.0)         # int_0^t a_cont
        if self._I_sig2[-1] <= 0 or np.any(np.diff(self._I_sig2) <= 0):
            raise ValueError("degenerate time map: int sigma^2 not strictly increasing")

        self.tau_max = 0.5 * self._I_sig2[-1]
        # backward tau on the same t grid (decreasing in t)
        self._tau = 0.5 * (self._I_sig2[-1] - self._I_sig2)

        # dividend tau images (backward and forward)
        self.cash_tau = tuple((self.tau_of_t(Tj), Tj, Dj)
                              for Tj, Dj in model.cash_divs)
        self.prop_tau = tuple((self.tau_of_t(ti), ti, di)
                              for ti, di in model.prop_divs)

        self._check_regularization()

    # -- calendar-time integrals ------------------------------------------
    def int_sigma2(self, t):
        return np.interp(t, self._t, self._I_sig2)

    def int_r(self, t):
        """int_0^t r(k) dk."""
        return np.interp(t, self._t, self._I_r)

    def int_a_cont(self, t):
        """int_0^t a_cont(k) dk (no dividend impulses)."""
        return np.interp(t, self._t, self._I_a)

    def int_a(self, t):
        """int_0^t a dk including -d_i jumps at crossed proportional dates."""
        t = np.asarray(t, dtype=float)
        out = self.int_a_cont(t)
        for ti, di in self.model.prop_divs:
            out = out - di * (t > ti)
        return out

    def df(self, t0, t1):
        """Deterministic discount factor exp(-int_{t0}^{t1} r)."""
        return np.exp(self.int_r(t0) - self.int_r(t1))

    # -- backward map ------------------------------------------------------
    def tau_of_t(self, t):
        return 0.5 * (self._I_sig2[-1] - self.int_sigma2(t))

    def t_of_tau(self, tau):
        # self._tau decreases with t; flip for np.interp
        return np.interp(tau, self._tau[::-1], self._t[::-1])

    def rbar_int(self, tau):
        """int_0^tau 2 r / sigma^2 dk = int_{t(tau)}^T r dt."""
        return self._I_r[-1] - self.int_r(self.t_of_tau(tau))

    def rho(self, tau):
        """int_0^tau 2 a / sigma^2 dk with -d_i jumps at crossed prop dates.

        Left-continuous in tau: at tau == tau_i the dividend is not yet
        included (it enters for tau > tau_i).
        """
        tau = np.asarray(tau, dtype=float)
        out = self._I_a[-1] - self.int_a_cont(self.t_of_tau(tau))
        for taui, _, di in self.prop_tau:
            out = out - di * (tau > taui)
        return out

    def rbar_loc(self, tau):
        """d rbar / d tau = 2 r(t(tau)) / sigma^2(t(tau))."""
        t = self.t_of_tau(tau)
        return 2.0 * np.asarray(self.model.r(t)) / np.asarray(self.model.sigma(t)) ** 2

    def rho_loc(self, tau):
        """Continuous part of d rho / d tau = 2 a_cont / sigma^2 at t(tau)."""
        t = self.t_of_tau(tau)
        return 2.0 * np.asarray(self.model.a_cont(t)) / np.asarray(self.model.sigma(t)) ** 2

    def alpha(self, tau):
        return np.exp(-np.asarray(tau, dtype=float) + self.rho(tau))

    def beta(self, tau):
        return np.exp(np.asarray(tau, dtype=float) + self.rbar_int(tau) - self.rho(tau))

    # -- forward map (density convention) ----------------------------------
    def taubar_of_t(self, t):
        return 0.5 * self.int_sigma2(t)

    def t_of_taubar(self, taubar):
        return np.interp(taubar, 0.5 * self._I_sig2, self._t)

    def alphabar(self, t):
        """exp(int_0^t (3 sigma^2/2 - a)); jumps up by factor e^{d_i}."""
        return np.exp(3.0 * self.taubar_of_t(t) - self.int_a(t))

    def __hash__(self):
        return id(self)

    # -- diagnostics -------------------------------------------------------
    def expected_spot(self, S, t):
        """E[S_t] from the first-moment ODE dE/dt = a E - b."""
        t = np.asarray(t, dtype=float)
        growth = np.exp(self.int_a(t))
        out = S * growth
        for Tj, Dj in self.model.cash_divs:
            out = out - Dj * np.exp(self.int_a(t) - self.int_a(Tj)) * (t > Tj)
        return out

    def _check_regularization(self):
        """Warn if the first-moment path dips non-positive (the model's
        admissibility condition on heavy borrow/dividend schedules).

        The condition depends on the spot level; it is checked only when a
        spot was supplied at construction.
        """
        if self._spot is None or not self.model.cash_divs:
            return
        tt = np.linspace(0.0, self.T, 513)
        if np.any(self.expected_spot(self._spot, tt) <= 0.0):
            warnings.warn(
                "mean-reversion regularization condition violated: "
                "E[S_t] becomes non-positive on [0, T]",
                RegularizationWarning,
            )
