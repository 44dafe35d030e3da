"""De-Americanization: inverting market quotes into model-equivalent
parameters.

* ``implied_sigma``: scalar solve for the mean volatility Sigma such that
  the model's American price at constant sigma = Sigma * sqrt(2) matches a
  market quote; the equivalent European price falls out of the final
  reprice.
* ``implied_strike_batch``: for a batch of same-maturity quotes, one
  strike-normalized European sweep is tabulated and each quote is
  inverted on the shared price-vs-x curve; the implied strike is
  K = alpha(0) * S * exp(-x).
* ``dupire_local_variance`` plus the x-coordinate substitution helpers: a
  pure transformation from a tabulated price surface to local-variance
  integrand values (no surface fitting).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .boundary import solve_boundary
from .european import solve_european
from .model import MarketModel, OptionSpec, TimeMap
from .pricer import price_american

__all__ = [
    "ImpliedResult", "ImpliedStrikeResult", "NoSolutionError",
    "SensitivityWarning", "implied_sigma", "implied_strike_batch",
    "sweep_counter", "dupire_local_variance", "x_substitutions",
    "read_quotes_csv", "write_quotes_csv",
]


class NoSolutionError(ValueError):
    """Quote outside the attainable band / no root in the bracket."""


class SensitivityWarning(UserWarning):
    """Emitted when the quote has very low volatility sensitivity."""


@dataclass
class ImpliedResult:
    sigma_bar: float              # Sigma, in 1/sqrt(yr)
    equivalent_european: float
    iterations: int
    residual: float


@dataclass
class ImpliedStrikeResult:
    x: float                      # dimensionless implied strike
    strike: float                 # alpha(0) * S * exp(-x)
    residual: float
    quote: tuple                  # (K_m, T_m, P_m, kind)


sweep_counter = {"pricing_sweeps": 0}


def _flat_sigma_model(model: MarketModel, sigma: float) -> MarketModel:
    return replace(model, s0=sigma, s1=0.0, sk=0.0, sigma_tab=None)


def _no_arb_band(model: MarketModel, spec: OptionSpec, tm: TimeMap):
    df = float(tm.df(0.0, spec.maturity))
    fwd = float(tm.expected_spot(spec.spot, spec.maturity))
    if spec.is_put:
        lo = max(spec.strike - spec.spot, 0.0, df * (spec.strike - fwd))
        hi = spec.strike
    else:
        lo = max(spec.spot - spec.strike, 0.0, df * (fwd - spec.strike))
        hi = spec.spot
    return lo, hi


def implied_sigma(market_price: float, model: MarketModel, spec: OptionSpec,
                  N: int = 50, bracket=(0.01, 3.0),
                  tol: float = 1e-10) -> ImpliedResult:
    """Bracketed solve for the constant mean volatility Sigma matching an
    American market quote; sigma(t) = Sigma * sqrt(2) constant.

    Raises NoSolutionError when the quote lies outside the no-arbitrage
    band or outside the price range attainable on the bracket.
    """
    probe = _flat_sigma_model(model, 0.2)
    tm = TimeMap(probe, spec.maturity)
    lo_band, hi_band = _no_arb_band(probe, spec, tm)
    if not lo_band - 1e-12 * spec.strike <= market_price <= hi_band:
        raise NoSolutionError(
            f"quote {market_price} outside no-arbitrage band "
            f"[{lo_band:.6g}, {hi_band:.6g}]")

    nev = [0]
    last = {}

    def f(Sig: float) -> float:
        nev[0] += 1
        m = _flat_sigma_model(model, Sig * np.sqrt(2.0))
        m_tm = TimeMap(m, spec.maturity)
        # tolerate partial march failure at extreme bracket probes
        # (failed nodes are interpolated by the pricer)
        b = solve_boundary(m, spec, N=N, tm=m_tm, fail_hard=False)
        rep = price_american(m, spec, N=N, tm=m_tm, boundary=b)
        sweep_counter["pricing_sweeps"] += 1
        last[Sig] = rep
        return rep.price - market_price

    f_lo, f_hi = f(bracket[0]), f(bracket[1])
    if f_lo * f_hi > 0.0:
        raise NoSolutionError(
            f"no Sigma in [{bracket[0]}, {bracket[1]}] reprices the quote "
            f"(price range [{f_lo + market_price:.6g}, "
            f"{f_hi + market_price:.6g}])")
    root = brentq(f, bracket[0], bracket[1], xtol=tol, rtol=8.9e-16)
    resid = f(root)
    rep = last[root]
    vega = (f(root + 1e-4) - f(root - 1e-4)) / 2e-4
    if abs(vega) < 1e-3 * spec.strike:
        warnings.warn("quote has very low sensitivity to the implied "
                      "volatility; the inversion is ill-conditioned",
                      SensitivityWarning)
    return ImpliedResult(float(root), rep.european, nev[0], float(resid))


def implied_strike_batch(quotes, model: MarketModel, spot: float,
                         n_x: int = 2001) -> list[ImpliedStrikeResult]:
    """Invert a fixed-maturity batch of European-equivalent quotes into
    implied strikes with a single pricing sweep.

    ``quotes``: iterable of (K_m, T_m, P_m) or (K_m, T_m, P_m, kind);
    kind defaults to Put.  Requires a cash-dividend-free model (the sweep
    is strike-normalized, which cash amounts break).
    """
    quotes = [tuple(q) + ("Put",) * (4 - len(q)) for q in quotes]
    Ts = {round(float(q[1]), 12) for q in quotes}
    if len(Ts) != 1:
        raise ValueError("implied_strike_batch requires a single maturity "
                         "per batch")
    T = float(quotes[0][1])
    if model.cash_divs:
        raise ValueError("strike-normalized sweep requires a model without "
                         "cash dividends")

    ref = OptionSpec("Put", spot, T, spot)      # reference strike = spot
    sol = solve_european(model, ref)
    sweep_counter["pricing_sweeps"] += 1
    tm = sol.tm
    a0 = sol.alpha0
    df = float(tm.df(0.0, T))
    fwd = float(tm.expected_spot(spot, T))
    What = CubicSpline(sol.x, sol.W / ref.strike)

    def put_curve(x):
        kk = a0 * spot * np.exp(-x)
        return kk * (What(x) * np.exp(sol.R0)
                     + np.exp(-np.exp(x) / a0 - sol.R0))

    # restrict the inversion to strikes within a wide moneyness window;
    # the tabulated curve's deep tails are extrapolation territory
    window = (a0 * spot * np.exp(-sol.x) >= 0.05 * spot) \
        & (a0 * spot * np.exp(-sol.x) <= 20.0 * spot)
    xs = sol.x[window]
    results = []
    for K_m, T_m, P_m, kind in quotes:
        if kind == "Put":
            g = lambda x: put_curve(x) - P_m
        else:
            g = lambda x: (put_curve(x)
                           + df * (fwd - a0 * spot * np.exp(-x)) - P_m)
        vals = g(xs)
        sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
        if len(sign_change) == 0:
            raise NoSolutionError(
                f"quote {P_m} lies outside the tabulated price curve; "
                "extrapolation refused")
        # several crossings can appear on a flat tail; take the one
        # closest to at-the-money
        i = sign_change[np.argmin(np.abs(xs[sign_change]))]
        x_root = brentq(g, xs[i], xs[i + 1], xtol=1e-14)
        results.append(ImpliedStrikeResult(
            float(x_root), float(a0 * spot * np.exp(-x_root)),
            float(g(x_root)), (float(K_m), float(T_m), float(P_m), kind)))
    return results


# ---------------------------------------------------------------------------
# modified-Dupire transformation utilities
# ---------------------------------------------------------------------------

def x_substitutions(K, sigma_T, a_T):
    """Chain-rule factors between strike and the dimensionless coordinate
    x = log(alpha S / K): returns (dx/dK, d2x/dK2, dx/dT)."""
    K = np.asarray(K, dtype=float)
    return -1.0 / K, 1.0 / (K * K), -0.5 * sigma_T ** 2 + a_T


def dupire_local_variance(T_grid, K_grid, C, r_fn, q_fn):
    """Local variance sigma_loc^2(T, K) from a tabulated call surface by
    central finite differences:

        sigma_loc^2 = 2 (C_T + q C + (r - q) K C_K) / (K^2 C_KK).

    Pure transformation: no smoothing or fitting.  Edge rows/columns are
    nan; non-convex columns yield nan.
    """
    T_grid = np.asarray(T_grid, dtype=float)
    K_grid = np.asarray(K_grid, dtype=float)
    C = np.asarray(C, dtype=float)
    out = np.full_like(C, np.nan)
    C_T = np.gradient(C, T_grid, axis=0)
    C_K = np.gradient(C, K_grid, axis=1)
    C_KK = np.gradient(C_K, K_grid, axis=1)
    r = np.asarray(r_fn(T_grid), dtype=float)[:, None]
    q = np.asarray(q_fn(T_grid), dtype=float)[:, None]
    K = K_grid[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        var = 2.0 * (C_T + q * C + (r - q) * K * C_K) / (K * K * C_KK)
    var = np.where(C_KK > 0.0, var, np.nan)
    out[1:-1, 1:-1] = var[1:-1, 1:-1]
    return out


# ---------------------------------------------------------------------------
# quote CSV I/O
# ---------------------------------------------------------------------------

def read_quotes_csv(path):
    """Quotes CSV with header K,T,price,kind -> list of tuples."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append((float(row["K"]), float(row["T"]),
                        float(row["price"]), row.get("kind", "Put") or "Put"))
    return out


def write_quotes_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "T", "price", "kind"])
        for K, T, p, kind in rows:
            w.writerow([f"{K:.10g}", f"{T:.10g}", f"{p:.10g}", kind])
