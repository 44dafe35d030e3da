"""Binomial-tree reference pricer (Cox-Ross-Rubinstein).

Independent of the transform-based engine: prices American and European
options on the same model by lattice rollback, using period-averaged
r, q, sigma.  Discrete dividends are handled either by re-interpolating
the continuation value across each ex-date (``lumpsum``) or by building
the lattice on the spot minus the present value of future cash dividends
(``shift``).  Also extracts the early-exercise boundary layer by layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MarketModel, OptionSpec, TimeMap

__all__ = ["TreeResult", "tree_price", "tree_boundary"]


@dataclass
class TreeResult:
    price: float
    times: np.ndarray           # layer times (ascending)
    boundary: np.ndarray        # exercise boundary per layer (nan where none)
    n_time: int
    n_space: int                # recorded; CRR ties spatial resolution to n_time
    exercised_any: bool


def _averaged(model: MarketModel, tm: TimeMap, T: float):
    r_a = tm.int_r(T) / T
    q_a = (tm.int_r(T) - tm.int_a_cont(T)) / T
    sig_a = np.sqrt(tm.int_sigma2(T) / T)
    return r_a, q_a, sig_a


def _interp_extrap(xq, x, y):
    """Linear interpolation with linear extrapolation at both ends."""
    out = np.interp(xq, x, y)
    lo = xq < x[0]
    if np.any(lo):
        sl = (y[1] - y[0]) / (x[1] - x[0])
        out[lo] = y[0] + sl * (xq[lo] - x[0])
    hi = xq > x[-1]
    if np.any(hi):
        sl = (y[-1] - y[-2]) / (x[-1] - x[-2])
        out[hi] = y[-1] + sl * (xq[hi] - x[-1])
    return out


def tree_price(model: MarketModel, spec: OptionSpec, n_time: int = 1000,
               n_space: int = 0, dividend_mode: str = "lumpsum",
               american: bool = True, want_boundary: bool = False) -> TreeResult:
    """CRR rollback with averaged coefficients.

    ``dividend_mode``: 'lumpsum' re-interpolates the continuation value at
    each ex-date; 'shift' prices on S minus the PV of future cash dividends
    (proportional dividends still interpolated).  n_space is recorded for
    reporting only: the CRR lattice couples spatial and temporal steps.
    """
    if dividend_mode not in ("lumpsum", "shift"):
        raise ValueError("dividend_mode must be 'lumpsum' or 'shift'")
    T, K, S0 = spec.maturity, spec.strike, spec.spot
    tm = TimeMap(model, T)
    r_a, q_a, sig_a = _averaged(model, tm, T)
    dt = T / n_time
    u = np.exp(sig_a * np.sqrt(dt))
    d = 1.0 / u
    disc = np.exp(-r_a * dt)
    p = (np.exp((r_a - q_a) * dt) - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise ValueError("tree step too coarse for these coefficients")

    cash = list(model.cash_divs)
    prop = list(model.prop_divs)
    # map each ex-date to the layer interval (m, m+1] containing it
    cash_at = {}
    for Tj, Dj in cash:
        m = min(int(np.ceil(Tj / dt)) - 1, n_time - 1)
        cash_at.setdefault(m, []).append(Dj)
    prop_at = {}
    for ti, di in prop:
        m = min(int(np.ceil(ti / dt)) - 1, n_time - 1)
        prop_at.setdefault(m, []).append(di)

    if dividend_mode == "shift":
        pv0 = sum(Dj * np.exp(-r_a * Tj) for Tj, Dj in cash)
        x0 = S0 - pv0
        if x0 <= 0:
            raise ValueError("spot minus dividend PV is non-positive")
    else:
        x0 = S0

    sign = -1.0 if spec.is_put else 1.0

    def payoff(s):
        return np.maximum(sign * (s - K), 0.0)

    def spot_of_lattice(x, m):
        if dividend_mode == "shift":
            t_m = m * dt
            pv = sum(Dj * np.exp(-r_a * (Tj - t_m)) for Tj, Dj in cash if Tj > t_m)
            return x + pv
        return x

    # terminal layer
    j = np.arange(n_time + 1)
    x = x0 * u ** j * d ** (n_time - j)
    V = payoff(spot_of_lattice(x, n_time))

    times = np.arange(n_time + 1) * dt
    bnd = np.full(n_time + 1, np.nan)
    exercised = False

    for m in range(n_time - 1, -1, -1):
        xm = x0 * u ** np.arange(m + 1) * d ** (m - np.arange(m + 1))
        x_next = x0 * u ** np.arange(m + 2) * d ** (m + 1 - np.arange(m + 2))
        V_next = V
        if m in cash_at and dividend_mode == "lumpsum":
            s_next = spot_of_lattice(x_next, m + 1)
            for Dj in cash_at[m]:
                V_next = _interp_extrap(s_next - Dj, s_next, V_next)
        if m in prop_at:
            s_next = spot_of_lattice(x_next, m + 1)
            for di in prop_at[m]:
                if dividend_mode == "shift":
                    x_post = s_next * np.exp(-di) - (s_next - x_next)
                    V_next = _interp_extrap(x_post, x_next, V_next)
                else:
                    V_next = _interp_extrap(s_next * np.exp(-di), s_next, V_next)
        cont = disc * (p * V_next[1:] + (1.0 - p) * V_next[:-1])
        if american:
            s_m = spot_of_lattice(xm, m)
            ex = payoff(s_m)
            if want_boundary:
                b = _layer_boundary(s_m, cont, ex, spec.is_put, K)
                if b is not None:
                    bnd[m] = b
                    exercised = True
            V = np.maximum(cont, ex)
            if not want_boundary and np.any(ex > cont + 1e-12 * K):
                exercised = True
        else:
            V = cont

    return TreeResult(float(V[0]), times, bnd, n_time, n_space, exercised)


def _layer_boundary(s, cont, ex, is_put, K):
    """Interpolated zero crossing of cont - ex at one rollback layer."""
    diff = cont - ex
    active = ex > 0.0
    hold = diff > 1e-12 * K
    if is_put:
        # exercise for small s: boundary = largest s with diff <= 0
        idx = np.nonzero(~hold & active)[0]
        if len(idx) == 0:
            return None
        i = idx[-1]
        if i + 1 <= len(s) - 1 and diff[i + 1] > diff[i]:
            w = -diff[i] / (diff[i + 1] - diff[i])
            return float(s[i] + w * (s[i + 1] - s[i]))
        return float(s[i])
    else:
        idx = np.nonzero(~hold & active)[0]
        if len(idx) == 0:
            return None
        i = idx[0]
        if i - 1 >= 0 and diff[i - 1] > diff[i]:
            w = -diff[i] / (diff[i - 1] - diff[i])
            return float(s[i] + w * (s[i - 1] - s[i]))
        return float(s[i])


def tree_boundary(model: MarketModel, spec: OptionSpec, n_time: int = 1000,
                  n_space: int = 0, dividend_mode: str = "lumpsum") -> TreeResult:
    """Convenience wrapper: rollback with per-layer boundary extraction."""
    return tree_price(model, spec, n_time=n_time, n_space=n_space,
                      dividend_mode=dividend_mode, american=True,
                      want_boundary=True)
