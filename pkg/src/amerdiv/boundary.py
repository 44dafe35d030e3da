"""Early-exercise boundary via the nonlinear Volterra equation.

The boundary is solved in the backward deformed time tau on a uniform
grid (dividend images snapped to nodes), marching from expiry (tau = 0)
to the valuation date (tau = tau_max).  At each node a scalar residual

    R(y_k) = LHS(y_k) - history integral - cash-dividend memory terms

is driven to zero by bracketed root finding.  Puts use
y = log(alpha S_B / K); calls use y = tau - rho - log(S_B / K).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .kernels import inner_integral_closed, j0_call, j0_put, lambda_cash_div
from .model import MarketModel, OptionSpec, TimeMap
from .volterra import MarchResult, TauGrid, make_tau_grid, march_and_solve, weak_quad

__all__ = ["BoundaryCurve", "NoBoundaryError", "BoundarySolveError",
           "solve_boundary", "eb_asymptote"]


class NoBoundaryError(Exception):
    """Raised internally when the exercise region is empty."""


class BoundarySolveError(RuntimeError):
    """Raised when the march fails on a significant fraction of nodes
    without a clean no-boundary diagnosis."""


@dataclass
class BoundaryCurve:
    spec: OptionSpec
    tau: np.ndarray
    t: np.ndarray                 # calendar times of the nodes (descending)
    y: np.ndarray
    S_B: np.ndarray               # nan where no boundary
    status: str                   # "ok" | "no_boundary"
    node_ok: np.ndarray
    div_flags: np.ndarray
    iterations: np.ndarray

    @property
    def exists(self) -> bool:
        return self.status == "ok"

    def value_at_tau(self, tau: float) -> float:
        """Linear interpolation of S_B in tau (nan-safe)."""
        good = self.node_ok & np.isfinite(self.S_B)
        if not good.any():
            return float("nan")
        return float(np.interp(tau, self.tau[good], self.S_B[good]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "tau", "y", "S_B", "status", "is_dividend_node"])
            for i in range(len(self.tau)):
                node_status = self.status if self.node_ok[i] else "failed"
                w.writerow([f"{self.t[i]:.10g}", f"{self.tau[i]:.10g}",
                            f"{self.y[i]:.10g}", f"{self.S_B[i]:.10g}",
                            node_status, int(self.div_flags[i])])


def eb_asymptote(tau, rho_loc_0: float):
    """Short-expiry boundary asymptote in y (valid while the log is
    negative); used for diagnostics and initial guesses."""
    tau = np.asarray(tau, dtype=float)
    arg = 2.0 * np.pi * rho_loc_0 ** 2 * tau
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(np.maximum(-tau * np.log(arg), 0.0))
    return -tau + rho_loc_0 * tau - root


def _terminal_y(model: MarketModel, T: float, is_put: bool) -> float:
    rT = float(np.asarray(model.r(T)))
    qT = float(np.asarray(model.q(T)))
    if is_put:
        if rT > 0.0 and qT > 0.0:
            return min(0.0, np.log(rT / qT))
        return 0.0
    if qT > 0.0 and rT > 0.0:
        return -max(0.0, np.log(rT / qT))
    return 0.0


def solve_boundary(model: MarketModel, spec: OptionSpec, N: int = 100,
                   tm: TimeMap | None = None, two_term: bool = True,
                   fail_hard: bool = True) -> BoundaryCurve:
    """March the Volterra equation for the early-exercise boundary.

    Degenerate regimes (put with r < 0 throughout; call with r > 0
    throughout, no carry and no dividends) are detected up front and
    reported as status 'no_boundary'.  During the march, bracket failure
    on at least 90% of nodes is also diagnosed as no boundary; failures
    above 10% but below that raise BoundarySolveError (or mark the curve
    failed when ``fail_hard`` is false).
    """
    if tm is None:
        tm = TimeMap(model, spec.maturity, spot=spec.spot)
    K = spec.strike
    is_put = spec.is_put
    T = spec.maturity

    tt = np.linspace(0.0, T, 513)
    r_curve = np.asarray(model.r(tt), dtype=float)
    q_curve = np.asarray(model.q(tt), dtype=float)
    if is_put and np.all(r_curve < 0.0):
        return _empty_curve(spec, tm, N, "no_boundary")
    if (not is_put and np.all(r_curve > 0.0) and np.all(q_curve <= 0.0)
            and not model.cash_divs and not model.prop_divs):
        return _empty_curve(spec, tm, N, "no_boundary")

    grid = make_tau_grid(tm.tau_max, N,
                         [c[0] for c in tm.cash_tau]
                         + [p[0] for p in tm.prop_tau])
    taus = grid.taus

    # node coefficients (left limits at dividend images, matching the
    # left-continuity of rho)
    alpha = np.asarray(tm.alpha(taus), dtype=float)
    beta = np.asarray(tm.beta(taus), dtype=float)
    rbl = np.asarray(tm.rbar_loc(taus), dtype=float)
    rhl = np.asarray(tm.rho_loc(taus), dtype=float)

    cash_nodes = []               # (node index, weight, alpha_j, beta_j)
    for img, Tj, Dj in tm.cash_tau:
        k = int(np.argmin(np.abs(taus - img)))
        w = float(tm.alpha(taus[k])) * Dj / K
        cash_nodes.append((k, w, float(tm.alpha(taus[k])),
                           float(tm.beta(taus[k]))))

    y0 = _terminal_y(model, T, is_put)
    lhs = j0_put if is_put else j0_call
    h = taus[1] - taus[0]

    def residual(k: int, y_k: float, y_hist: np.ndarray) -> float:
        tau = taus[k]
        y = y_hist
        # one-sided derivative of y, entering only through s * y'
        yp = np.empty(k)
        yp[0] = 0.0
        if k > 1:
            yp[1:] = (y[1:k] - y[: k - 1]) / np.diff(taus[:k])
        g = np.empty(k + 1)
        g[:k] = inner_integral_closed(taus[:k], tau, y[:k], y_k, yp,
                                      alpha[:k], beta[:k], rbl[:k], rhl[:k],
                                      K, is_put=is_put)
        z_k = K * beta[k] * ((alpha[k] - np.exp(y_k)) if is_put
                             else (np.exp(-y_k) - alpha[k]))
        sgn = 1.0 if is_put else -1.0
        g[k] = -(2.0 * tau + rbl[k]) * z_k \
            - sgn * K * beta[k] * np.exp(sgn * y_k) * rhl[k]
        hist = weak_quad(k, g, taus[: k + 1], two_term=two_term)
        mem = 0.0
        for kj, w, al_j, be_j in cash_nodes:
            if kj < k:
                jdiv = lambda_cash_div(taus[kj], tau, y[kj], y_k,
                                       al_j, be_j, K, is_put=is_put)
                mem += w * jdiv if is_put else -w * jdiv
        return lhs(y_k, tau, K) - hist - mem

    def init_rule(k: int, y_prev: float) -> float:
        return y_prev

    res: MarchResult = march_and_solve(residual, grid, y_init_rule=init_rule)
    res.y[0] = y0

    n_nodes = len(taus) - 1
    n_fail = len(set(res.failures))
    if n_fail >= 0.9 * n_nodes:
        return _empty_curve(spec, tm, N, "no_boundary")
    if n_fail > 0.1 * n_nodes:
        msg = (f"boundary march failed on {n_fail}/{n_nodes} nodes "
               f"(first failures at tau = "
               f"{[round(taus[i], 6) for i in sorted(set(res.failures))[:5]]})")
        if fail_hard:
            raise BoundarySolveError(msg)

    rho = np.asarray(tm.rho(taus), dtype=float)
    if is_put:
        S_B = K * np.exp(res.y + taus - rho)
    else:
        S_B = K * np.exp(taus - rho - res.y)
    S_B = np.where(res.ok, S_B, np.nan)

    return BoundaryCurve(spec, taus, np.asarray(tm.t_of_tau(taus)), res.y,
                         S_B, "ok", res.ok, grid.div_flags, res.iterations)


def _empty_curve(spec: OptionSpec, tm: TimeMap, N: int,
                 status: str) -> BoundaryCurve:
    grid = make_tau_grid(tm.tau_max, N,
                         [c[0] for c in tm.cash_tau]
                         + [p[0] for p in tm.prop_tau])
    taus = grid.taus
    nan = np.full_like(taus, np.nan)
    return BoundaryCurve(spec, taus, np.asarray(tm.t_of_tau(taus)),
                         nan.copy(), nan.copy(), status,
                         np.zeros_like(taus, dtype=bool), grid.div_flags,
                         np.zeros_like(taus, dtype=int))
