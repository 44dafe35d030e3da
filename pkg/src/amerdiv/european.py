"""European price via the heat-equation representation.

The discounted price is written as

    P(t, S) = W(tau, x) e^{R(t)} + K exp(-S/K - R(t)),
    x = log(alpha(tau) S / K),   R(t) = int_T^t r,

which turns the pricing PDE into a driven heat equation

    W_tau = W_xx + Theta(tau, x)

between dividend dates, with explicit transport/jump maps of W across
cash and proportional ex-dates.  The march is: closed forms for the
terminal-payoff propagation on the first segment, FFT Gaussian
convolution afterwards, trapezoid-in-nu convolution of the source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .kernels import closed_form_I1
from .model import MarketModel, OptionSpec, TimeMap

__all__ = ["EuroSolution", "solve_european", "price_european", "heat_step"]


def heat_step(W: np.ndarray, h: float, dtau: float) -> np.ndarray:
    """Evolve W by the heat semigroup exp(dtau * d^2/dx^2) on a uniform
    grid of spacing h, constant-padding both edges.

    Uses a discretely normalized Gaussian convolution (spectrally accurate
    once the kernel width exceeds a few grid cells) and a second-order
    Taylor step W + dtau W_xx for steps too small to resolve.
    """
    if dtau <= 0.0:
        return W.copy()
    sd = np.sqrt(2.0 * dtau)
    if sd < 3.0 * h:
        Wxx = np.empty_like(W)
        Wxx[1:-1] = (W[2:] - 2.0 * W[1:-1] + W[:-2]) / (h * h)
        Wxx[0] = Wxx[1]
        Wxx[-1] = Wxx[-2]
        return W + dtau * Wxx
    m = int(np.ceil(8.0 * sd / h))
    z = np.arange(-m, m + 1) * h
    ker = np.exp(-z * z / (4.0 * dtau))
    ker /= ker.sum()
    Wp = np.pad(W, m, mode="edge")
    return fftconvolve(Wp, ker, mode="valid")


@dataclass
class EuroSolution:
    """Terminal state of the backward march plus everything needed to read
    prices off it."""

    model: MarketModel
    spec: OptionSpec
    tm: TimeMap
    x: np.ndarray
    W: np.ndarray
    tau_max: float
    alpha0: float            # alpha(tau_max), the valuation-date alpha
    R0: float                # R(0) = -int_0^T r
    strike_homogeneous: bool

    def price(self, spot: float | None = None) -> float:
        S = self.spec.spot if spot is None else spot
        K = self.spec.strike
        xq = np.log(self.alpha0 * S / K)
        W = CubicSpline(self.x, self.W)(xq)
        return float(W * np.exp(self.R0) + K * np.exp(-S / K - self.R0))

    def price_for_strikes(self, strikes: np.ndarray) -> np.ndarray:
        """Prices at the valuation spot for a vector of strikes.

        Valid because W/K is strike-free when no cash dividends enter the
        source term; raises otherwise.
        """
        if not self.strike_homogeneous:
            raise ValueError("strike curve read-off requires a model "
                             "without cash dividends")
        strikes = np.asarray(strikes, dtype=float)
        S = self.spec.spot
        K = self.spec.strike
        xq = np.log(self.alpha0 * S / strikes)
        What = CubicSpline(self.x, self.W / K)(xq)
        return strikes * (What * np.exp(self.R0)
                          + np.exp(-S / strikes - self.R0))


def _theta_source(tm: TimeMap, K: float, tau: float,
                  x: np.ndarray) -> np.ndarray:
    """Source term of the driven heat equation at backward time tau
    (continuous coefficient parts only)."""
    t = float(tm.t_of_tau(tau))
    sig2 = float(np.asarray(tm.model.sigma(t))) ** 2
    r = float(np.asarray(tm.model.r(t)))
    a = float(np.asarray(tm.model.a_cont(t)))
    al = float(tm.alpha(tau))
    e2R = np.exp(2.0 * float(tm.rbar_int(tau)))      # e^{-2R(t)}
    ex = np.exp(x)
    core = np.exp(-ex / al)
    return K * core * e2R * (ex * ex / (al * al)
                             - (2.0 / sig2) * (2.0 * r + a * ex / al))


def _deep_itm_W(tm: TimeMap, K: float, tau: float, S: np.ndarray) -> np.ndarray:
    """W implied by the always-exercised deep-in-the-money put value
    P = DF (K - E[S_T | S_t]); used below the cash-dividend transport
    range (S - D <= 0), where the lattice representation has no image."""
    t = float(tm.t_of_tau(tau))
    T = tm.T
    growth = np.exp(tm.int_a(T) - tm.int_a(t))
    fwd = S * growth
    for Tj, Dj in tm.model.cash_divs:
        if Tj > t:
            fwd = fwd - Dj * np.exp(tm.int_a(T) - tm.int_a(Tj))
    R = -float(tm.rbar_int(tau))
    P = np.exp(R) * (K - fwd)
    return (P - K * np.exp(-S / K - R)) * np.exp(-R)


def solve_european(model: MarketModel, spec: OptionSpec, n_x: int = 2001,
                   n_nu: int = 64, x_half: float | None = None,
                   tm: TimeMap | None = None) -> EuroSolution:
    """Backward march of the driven heat equation from the payoff at
    tau = 0 to the valuation date tau = tau_max."""
    if tm is None:
        tm = TimeMap(model, spec.maturity, spot=spec.spot)
    K = spec.strike
    if not spec.is_put:
        raise ValueError("solve_european marches the put representation; "
                         "price calls through price_european (parity)")

    tau_max = tm.tau_max
    alpha0 = float(tm.alpha(tau_max))
    x_S = np.log(alpha0 * spec.spot / K)
    if x_half is None:
        x_half = max(6.0 * np.sqrt(2.0 * tau_max) + 1.0, abs(x_S) + 2.0, 3.5)
    if n_x % 2 == 0:
        n_x += 1
    h = 2.0 * x_half / (n_x - 1)
    x = x_S - x_half + np.arange(n_x) * h

    # event schedule in backward tau (cash and proportional dividends)
    events = []
    for tauj, Tj, Dj in tm.cash_tau:
        events.append((tauj, "cash", Tj, Dj))
    for taui, ti, di in tm.prop_tau:
        events.append((taui, "prop", ti, di))
    events.sort(key=lambda e: e[0])

    def source(tau_a, tau_b, W_acc):
        """Add int_{tau_a}^{tau_b} heat_{tau_b - nu} Theta(nu) d nu."""
        if tau_b <= tau_a:
            return W_acc
        nus = np.linspace(tau_a, tau_b, n_nu + 1)
        wts = np.full(n_nu + 1, nus[1] - nus[0])
        wts[0] *= 0.5
        wts[-1] *= 0.5
        acc = np.zeros_like(W_acc)
        eps = 1e-12
        for nu, w in zip(nus, wts):
            # coefficients are one-sided at dividend images: evaluate them
            # strictly inside the segment so the correct branch is taken
            nu_c = min(max(nu, tau_a + eps), tau_b - eps)
            th = _theta_source(tm, K, nu_c, x)
            acc += w * heat_step(th, h, tau_b - nu)
        return W_acc + acc

    # --- first segment: closed-form propagation of the terminal payoff ---
    tau_prev = 0.0
    seg_end = events[0][0] if events else tau_max
    seg_end = min(seg_end, tau_max)
    # terminal profile split: kinky part in closed form, smooth part convolved
    I1 = closed_form_I1(x, seg_end) if seg_end > 0 else np.maximum(1 - np.exp(x), 0)
    I2 = -heat_step(np.exp(-np.exp(x)), h, seg_end)
    W = K * (I1 + I2)
    W = source(0.0, seg_end, W)
    tau_prev = seg_end

    ev_idx = 0
    while ev_idx < len(events) and events[ev_idx][0] <= tau_prev + 1e-15:
        W = _apply_event(tm, K, x, W, events[ev_idx])
        ev_idx += 1

    while tau_prev < tau_max - 1e-15:
        seg_end = events[ev_idx][0] if ev_idx < len(events) else tau_max
        seg_end = min(seg_end, tau_max)
        W = heat_step(W, h, seg_end - tau_prev)
        W = source(tau_prev, seg_end, W)
        tau_prev = seg_end
        while ev_idx < len(events) and events[ev_idx][0] <= tau_prev + 1e-15:
            W = _apply_event(tm, K, x, W, events[ev_idx])
            ev_idx += 1

    return EuroSolution(model, spec, tm, x, W, tau_max, alpha0,
                        -float(tm.int_r(tm.T)),
                        strike_homogeneous=not model.cash_divs)


def _apply_event(tm: TimeMap, K: float, x: np.ndarray, W: np.ndarray,
                 event) -> np.ndarray:
    """Jump map of W across one dividend ex-date (backward direction:
    the incoming W is the post-date state in calendar time)."""
    tau_e, kind, t_e, amount = event
    if kind == "cash":
        Dj = amount
        al = float(tm.alpha(tau_e))            # alpha continuous across cash
        gam = Dj * al / K
        e2R = np.exp(2.0 * float(tm.rbar_int(tau_e)))
        ex = np.exp(x)
        shifted = ex - gam
        mask = shifted > np.exp(x[0])
        spline = CubicSpline(x, W)
        W_new = np.empty_like(W)
        W_new[mask] = spline(np.log(shifted[mask]))
        if np.any(~mask):
            W_new[~mask] = _deep_itm_W(tm, K, tau_e, shifted[~mask] * K / al)
        lump = K * e2R * (np.exp(Dj / K) - 1.0) * np.exp(-ex / al)
        return W_new + lump
    else:
        di = amount
        al_minus = float(tm.alpha(tau_e - 1e-12))   # calendar post-date side
        al_plus = al_minus * np.exp(-di)            # calendar pre-date side
        e2R = np.exp(2.0 * float(tm.rbar_int(tau_e)))
        ex = np.exp(x)
        return W + K * e2R * (np.exp(-ex / al_minus) - np.exp(-ex / al_plus))


def price_european(model: MarketModel, spec: OptionSpec, n_x: int = 2001,
                   n_nu: int = 64, tm: TimeMap | None = None) -> float:
    """European price; calls are obtained from the put by parity."""
    if spec.is_put:
        return solve_european(model, spec, n_x=n_x, n_nu=n_nu, tm=tm).price()
    put = OptionSpec("Put", spec.strike, spec.maturity, spec.spot)
    if tm is None:
        tm = TimeMap(model, spec.maturity, spot=spec.spot)
    p = solve_european(model, put, n_x=n_x, n_nu=n_nu, tm=tm).price()
    # parity: C - P = DF * (E[S_T] - K)
    df = float(tm.df(0.0, tm.T))
    fwd = float(tm.expected_spot(spec.spot, tm.T))
    return p + df * (fwd - spec.strike)
