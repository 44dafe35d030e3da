"""Forward transition density of the spot under the dividend-paying model.

With the forward deformed time taubar(t) = 1/2 int_0^t sigma^2 and

    x = log(s * alphabar(t) / S0),   alphabar = exp(3 taubar - int_0^t a),

the density transforms as p(t, s) = W(taubar, x) * exp(g(t)) with
g = 2 taubar - int_0^t a - log S0, and W solves the pure heat equation
W_taubar = W_xx between cash ex-dates.  Cash dividends act as the exact
shift W(x) -> W(log(e^x + gamma_j)); proportional dividends leave W
untouched (they live entirely in alphabar and g).
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import norm

from .european import heat_step
from .model import MarketModel, TimeMap

__all__ = ["DensityPath", "lognormal_prob_below", "lognormal_partial_mean_below"]


class DensityPath:
    """Marches the transformed density forward; query times must be
    non-decreasing.  At a query equal to a cash ex-date the pre-dividend
    state is returned (the dividend applies only for t strictly larger)."""

    def __init__(self, model: MarketModel, spot: float, horizon: float,
                 n_x: int = 2001, n_sd: float = 8.0,
                 tm: TimeMap | None = None):
        self.model = model
        self.S0 = float(spot)
        self.T = float(horizon)
        self.tm = tm if tm is not None else TimeMap(model, self.T, spot=spot)
        if n_x % 2 == 0:
            n_x += 1
        taubar_max = float(self.tm.taubar_of_t(self.T))
        half = max(n_sd * np.sqrt(2.0 * taubar_max), 0.5)
        self.x = np.linspace(-half, half, n_x)
        self.h = self.x[1] - self.x[0]
        self._cash = sorted(model.cash_divs)          # [(T_j, D_j)]
        self._done = 0                                # cash events applied
        self._taubar = 0.0
        self._W: np.ndarray | None = None             # None => still a delta
        self._t = 0.0

    # -- march -------------------------------------------------------------
    def _advance_to(self, t: float) -> None:
        if t < self._t - 1e-14:
            raise ValueError("DensityPath queries must be non-decreasing")
        while self._done < len(self._cash) and self._cash[self._done][0] < t - 1e-14:
            Tj, Dj = self._cash[self._done]
            self._evolve(float(self.tm.taubar_of_t(Tj)))
            gam = Dj * float(self.tm.alphabar(Tj)) / self.S0
            arg = np.exp(self.x) + gam
            W = CubicSpline(self.x, self._W)(np.log(arg))
            # beyond the original support the density is zero
            W[np.log(arg) > self.x[-1]] = 0.0
            self._W = W
            self._done += 1
        self._evolve(float(self.tm.taubar_of_t(t)))
        self._t = t

    def _evolve(self, taubar: float) -> None:
        d = taubar - self._taubar
        if d <= 0.0:
            return
        if self._W is None:
            self._W = np.exp(-self.x ** 2 / (4.0 * taubar)) \
                / (2.0 * np.sqrt(np.pi * taubar))
        else:
            W = heat_step(self._W, self.h, d)
            # zero padding at the edges, not constant: density decays
            W[0] = W[-1] = 0.0
            self._W = W
        self._taubar = taubar

    # -- read-offs ---------------------------------------------------------
    def _frame(self, t: float):
        self._advance_to(t)
        abar = float(self.tm.alphabar(t))
        g = 2.0 * float(self.tm.taubar_of_t(t)) - float(self.tm.int_a(t)) \
            - np.log(self.S0)
        s = self.S0 * np.exp(self.x) / abar
        return s, self._W, np.exp(g)

    def density(self, t: float, s_query: np.ndarray) -> np.ndarray:
        """p(t, s) on an arbitrary spot grid (zero outside support)."""
        s, W, eg = self._frame(t)
        abar = float(self.tm.alphabar(t))
        s_query = np.asarray(s_query, dtype=float)
        out = np.zeros_like(s_query)
        pos = s_query > 0.0
        xq = np.log(s_query[pos] * abar / self.S0)
        inside = (xq >= self.x[0]) & (xq <= self.x[-1])
        vals = np.zeros_like(xq)
        vals[inside] = CubicSpline(self.x, W)(xq[inside])
        out[pos] = np.maximum(vals, 0.0) * eg
        return out

    def expect(self, t: float, f=None) -> float:
        """E[f(S_t)] for vectorized f (mass when f is None)."""
        s, W, eg = self._frame(t)
        vals = W * s if f is None else W * s * f(s)
        return float(eg * np.trapezoid(vals, self.x))

    def mass(self, t: float) -> float:
        return self.expect(t)

    def mean(self, t: float) -> float:
        return self.expect(t, lambda s: s)

    def second_moment(self, t: float) -> float:
        return self.expect(t, lambda s: s * s)

    def prob_below(self, t: float, level: float) -> float:
        return self._region_integral(t, level, weight_spot=False)

    def partial_mean_below(self, t: float, level: float) -> float:
        """E[S_t 1_{S_t <= level}]."""
        return self._region_integral(t, level, weight_spot=True)

    def _region_integral(self, t: float, level: float,
                         weight_spot: bool) -> float:
        s, W, eg = self._frame(t)
        abar = float(self.tm.alphabar(t))
        if level <= 0.0:
            return 0.0
        xb = np.log(level * abar / self.S0)
        if xb <= self.x[0]:
            return 0.0
        integrand = W * s * (s if weight_spot else 1.0)
        if xb >= self.x[-1]:
            return float(eg * np.trapezoid(integrand, self.x))
        k = int(np.searchsorted(self.x, xb))          # x[k-1] < xb <= x[k]
        total = np.trapezoid(integrand[:k], self.x[:k])
        # partial last cell by linear interpolation of the integrand
        fk = np.interp(xb, self.x, integrand)
        total += 0.5 * (integrand[k - 1] + fk) * (xb - self.x[k - 1])
        return float(eg * total)


def lognormal_prob_below(tm: TimeMap, spot: float, t: float,
                         level: float) -> float:
    """P(S_t <= level) when no cash dividends act before t (proportional
    dividends enter through the drift integral)."""
    taubar = float(tm.taubar_of_t(t))
    ia = float(tm.int_a(t))
    sd = np.sqrt(2.0 * taubar)
    if sd == 0.0:
        return float(spot <= level)
    return float(norm.cdf((np.log(level / spot) - ia + taubar) / sd))


def lognormal_partial_mean_below(tm: TimeMap, spot: float, t: float,
                                 level: float) -> float:
    """E[S_t 1_{S_t <= level}] in the same cash-dividend-free regime."""
    taubar = float(tm.taubar_of_t(t))
    ia = float(tm.int_a(t))
    sd = np.sqrt(2.0 * taubar)
    if sd == 0.0:
        return float(spot * (spot <= level))
    d = (np.log(level / spot) - ia - taubar) / sd
    return float(spot * np.exp(ia) * norm.cdf(d))
