"""Generic machinery for the weakly singular Volterra equations.

Provides the tau grid (uniform with dividend images snapped onto nodes),
the singularity-subtracted quadrature for integrals of the form

    int_0^tau g(s) * exp(-(y(tau)-y(s))^2 / (4 (tau-s))) / sqrt(pi (tau-s)) ds,

and the sequential node-by-node root-solving march used by the boundary
solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

__all__ = ["TauGrid", "make_tau_grid", "weak_quad", "march_and_solve", "MarchResult"]

SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class TauGrid:
    """Nodes 0 = tau_0 < ... < tau_N = tau_max with dividend-node flags."""

    taus: np.ndarray
    div_flags: np.ndarray          # True where a cash-dividend image sits
    snap_report: tuple = ()        # (requested_image, snapped_node) pairs

    @property
    def n(self) -> int:
        return len(self.taus) - 1


def make_tau_grid(tau_max: float, N: int, div_images=()) -> TauGrid:
    """Uniform grid with every dividend tau-image snapped to its nearest
    node (interior nodes only); the snapping distance is reported."""
    if N < 16:
        raise ValueError("need N >= 16 grid steps")
    taus = np.linspace(0.0, tau_max, N + 1)
    flags = np.zeros(N + 1, dtype=bool)
    report = []
    for img in div_images:
        if not 0.0 < img < tau_max:
            continue
        k = int(np.clip(round(img / (tau_max / N)), 1, N - 1))
        flags[k] = True
        report.append((float(img), float(taus[k])))
    return TauGrid(taus, flags, tuple(report))


def weak_quad(k: int, h: np.ndarray, taus: np.ndarray,
              two_term: bool = True) -> float:
    """Singularity-subtracted trapezoid for int_0^tau h(s)/sqrt(pi (tau-s)) ds
    at node tau = taus[k].

    ``h[i]`` holds the regular factor (including any Gaussian kernel
    factor, which tends to 1 on the diagonal) at s = taus[i] for i < k,
    and ``h[k]`` its diagonal limit.  Subtraction removes the integrable
    1/sqrt(tau-s) singularity: the constant term is integrated exactly as
    2 h(tau) sqrt(tau/pi); with ``two_term`` the linear term of h at
    s = tau is also removed analytically, which restores second-order
    convergence otherwise lost to the sqrt(tau-s) remainder.
    """
    tau = taus[k]
    if k == 0:
        return 0.0
    dt = tau - taus[:k]
    hk = h[k]
    total = 2.0 * hk * np.sqrt(tau / np.pi)

    resid = h[:k] - hk
    if two_term and k >= 2:
        c1 = (hk - h[k - 1]) / dt[-1]       # one-sided slope of h at s=tau
        resid = resid + c1 * dt
        total -= c1 * (2.0 / (3.0 * SQRT_PI)) * tau ** 1.5

    integrand = np.append(resid / np.sqrt(np.pi * dt), 0.0)
    return total + float(np.trapezoid(integrand, taus[: k + 1]))


@dataclass
class MarchResult:
    y: np.ndarray
    ok: np.ndarray                 # per-node root found?
    iterations: np.ndarray
    failures: list = field(default_factory=list)


def _find_bracket(f, y0: float, lo_limit: float, hi_limit: float):
    """Expand a bracket around y0 until f changes sign, within limits."""
    f0 = f(y0)
    if f0 == 0.0:
        return y0, y0
    step = 0.05
    lo = hi = y0
    flo = fhi = f0
    while True:
        grew = False
        if lo > lo_limit:
            lo = max(lo_limit, lo - step)
            flo = f(lo)
            grew = True
            if flo == 0.0:
                return lo, lo
            if np.sign(flo) != np.sign(fhi):
                return lo, hi
        if hi < hi_limit:
            hi = min(hi_limit, hi + step)
            fhi = f(hi)
            grew = True
            if fhi == 0.0:
                return hi, hi
            if np.sign(flo) != np.sign(fhi):
                return lo, hi
        if not grew:
            return None
        step *= 2.0


def march_and_solve(residual, grid: TauGrid, y_init_rule=None,
                    tol: float = 1e-8, max_iter: int = 200) -> MarchResult:
    """Sequential backward-in-time march: at each node solve the scalar
    residual to |R| < tol with the previous node's value as the initial
    guess, bracketing within [y_prev - 10, y_prev + 2].

    ``residual(k, y_k, y_history)`` must be callable for each node given
    all earlier values; ``y_init_rule(k, y_prev)`` may refine the guess.
    """
    taus = grid.taus
    n = len(taus)
    y = np.zeros(n)
    ok = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    failures = []
    for k in range(1, n):
        y_prev = y[k - 1] if ok[k - 1] else (y[k - 2] if k >= 2 else 0.0)
        guess = y_prev if y_init_rule is None else y_init_rule(k, y_prev)
        nev = [0]

        def f(v):
            nev[0] += 1
            return residual(k, v, y)

        br = _find_bracket(f, guess, guess - 10.0, guess + 2.0)
        if br is None:
            ok[k] = False
            y[k] = y_prev
            failures.append(k)
            iters[k] = nev[0]
            continue
        lo, hi = br
        if lo == hi:
            root = lo
        else:
            root = brentq(f, lo, hi, xtol=1e-13, rtol=8.9e-16,
                          maxiter=max_iter)
        y[k] = root
        iters[k] = nev[0]
        if abs(f(root)) > max(tol, 1e-10 * (1.0 + abs(f(guess)))):
            # root found but residual larger than requested: keep, flag
            if abs(f(root)) > 1e-6:
                ok[k] = False
                failures.append(k)
    return MarchResult(y, ok, iters, failures)
