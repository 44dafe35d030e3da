"""Special functions and closed-form integrals used by the solvers.

Everything here is a pure function: the heat (Gaussian) kernel, the
erf-family closed forms for the terminal-payoff integrals, the J2 family
of half-line Gaussian moments, and the closed-form inner integrals of
the early-exercise-boundary equations (both the generic history term and
the cash-dividend term).

Overflow policy: any expression of the shape e^{u^2} erfc(u) is evaluated
through scipy.special.erfcx, so the Gaussian prefactor can never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import erf, erfc, erfcx, ndtr

__all__ = [
    "gauss_kernel",
    "closed_form_I1",
    "numeric_I2",
    "approx_I2",
    "j0_put",
    "j0_call",
    "J2Family",
    "j2_family",
    "inner_integral_closed",
    "lambda_cash_div",
]


def gauss_kernel(x, xi, tau):
    """Heat kernel G(x, xi, tau) = exp(-(x-xi)^2/(4 tau)) / (2 sqrt(pi tau))."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0):
        raise ValueError("gauss_kernel requires tau > 0")
    d = np.asarray(x, dtype=float) - np.asarray(xi, dtype=float)
    return np.exp(-d * d / (4.0 * tau)) / (2.0 * np.sqrt(np.pi * tau))


def closed_form_I1(x, tau):
    """int (1 - e^xi)^+ G(x, xi, tau) dxi in closed form.

    Equals Phi(-x/sqrt(2 tau)) - e^{x + tau} Phi(-(x + 2 tau)/sqrt(2 tau));
    the exponential factor is evaluated erfcx-style for large x.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(2.0 * tau)
    u = (x + 2.0 * tau) / s
    # e^{x+tau} * Phi(-u) = e^{x+tau-u^2/2} * erfcx(u/sqrt2) / 2 for u > 0
    first = ndtr(-x / s)
    # both where-branches are evaluated, so each argument is clipped to
    # stay finite on the rows the other branch owns
    pos = u > 0.0
    e_pos = x + tau - 0.5 * np.maximum(u, 0.0) ** 2
    e_neg = np.minimum(x + tau, 700.0)
    second = np.where(
        pos,
        0.5 * np.exp(np.minimum(e_pos, 700.0)) * erfcx(np.maximum(u, 0.0)
                                                       / np.sqrt(2.0)),
        np.exp(e_neg) * ndtr(-u),
    )
    return first - second


def numeric_I2(x, tau, tol: float = 1e-12):
    """-int e^{-e^xi} G(x, xi, tau) dxi by adaptive quadrature."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    half = 10.0 * np.sqrt(2.0 * tau)
    for i, xv in enumerate(xs):
        val, _ = quad(
            lambda z: np.exp(-np.exp(z)) * gauss_kernel(xv, z, tau),
            xv - half, xv + half, epsabs=tol, epsrel=tol, limit=200,
        )
        out[i] = -val
    return out if np.ndim(x) else float(out[0])

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(16)


def approx_I2(x, tau, strict: bool = False):
    """Fast fixed-cost approximation of -int e^{-e^xi} G dxi.

    For small tau the 4th-order Taylor expansion of e^{-e^x} - e^{-e^xi}
    around xi = x is used (odd moments vanish; E[(xi-x)^2] = 2 tau,
    E[(xi-x)^4] = 12 tau^2).  The expansion is asymptotic, not convergent,
    and its error exceeds a cent around x ~ 1-2 for tau >~ 0.2, so beyond
    tau = 0.13 a 16-node Gauss-Hermite rule on the substituted integrand
    e^{-exp(x + 2 sqrt(tau) u)} e^{-u^2} is used instead (entire in u, so
    a handful of fixed nodes reach ~1e-7 for tau <= 0.35).  Outside
    (0, 0.35] the adaptive quadrature is used (or, with ``strict``, a
    ValueError is raised).
    """
    if tau <= 0 or tau > 0.35:
        if strict:
            raise ValueError("approx_I2 validated only for tau in (0, 0.35]")
        return numeric_I2(x, tau)
    x = np.asarray(x, dtype=float)
    if tau > 0.13:
        z = np.minimum(x[..., None] + 2.0 * np.sqrt(tau) * _GH_NODES, 30.0)
        val = -(np.exp(-np.exp(z)) @ _GH_WEIGHTS) / np.sqrt(np.pi)
        return val if x.ndim else float(val)
    ex = np.exp(x)
    d2 = ex * (ex - 1.0)                                   # f''(x) sign folded
    d4 = ex * (ex * (ex * (ex - 6.0) + 7.0) - 1.0)
    return np.exp(-ex) * (-1.0 - tau * d2 - 0.5 * tau * tau * d4)


def j0_put(y_tau: float, tau: float, K: float = 1.0) -> float:
    """Left-hand side kernel term of the Put boundary equation:
    -K e^{tau + y} [1 + erf((2 tau + y)/(2 sqrt(tau)))], overflow-safe."""
    u = (2.0 * tau + y_tau) / (2.0 * np.sqrt(tau))
    if u >= 0.0:
        return -K * np.exp(tau + y_tau) * erfc(-u)       # erfc(-u) in [1, 2]
    return -K * np.exp(tau + y_tau - u * u) * erfcx(-u)


def j0_call(y_tau: float, tau: float, K: float = 1.0) -> float:
    """Call analogue: -K e^{tau - y} erfc((2 tau - y)/(2 sqrt(tau)))."""
    u = (2.0 * tau - y_tau) / (2.0 * np.sqrt(tau))
    if u <= 0.0:
        return -K * np.exp(tau - y_tau) * erfc(u)
    return -K * np.exp(tau - y_tau - u * u) * erfcx(u)


@dataclass(frozen=True)
class J2Family:
    """J2 = int_0^inf exp(-k2 Z^2 + k1 Z) dZ and its first three
    derivatives with respect to k1."""

    J2: float
    J2p: float
    J2pp: float
    J2ppp: float
    k1: float
    k2: float


def j2_family(k1, k2, log_scale=0.0) -> J2Family:
    """Closed-form half-line Gaussian moments via one erfcx evaluation,
    multiplied by exp(log_scale).

    The scale is the caller's Gaussian kernel factor: folding it in here
    keeps the product finite when J2 alone would overflow (it grows like
    exp(k1^2 / 4 k2), which the kernel exactly tempers).  Derivatives
    follow from J^{(n+1)} = (n J^{(n-1)} + k1 J^{(n)}) / (2 k2), which is
    linear and therefore scales through.
    """
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    log_scale = np.asarray(log_scale, dtype=float)
    if np.any(k2 <= 0.0):
        raise ValueError("j2_family requires k2 > 0")
    rk = np.sqrt(k2)
    v = k1 / (2.0 * rk)
    E = np.exp(log_scale)
    # E * erfcx(-v): stable both ways via erfcx(-v) = 2 e^{v^2} - erfcx(v);
    # both where-branches are evaluated, so each is clipped to stay finite
    scaled = np.where(v <= 0.0, E * erfcx(-np.minimum(v, 0.0)),
                      2.0 * np.exp(np.minimum(v * v + log_scale, 700.0))
                      - E * erfcx(np.abs(v)))
    J2 = 0.5 * np.sqrt(np.pi) / rk * scaled
    J2p = (E + k1 * J2) / (2.0 * k2)
    J2pp = (J2 + k1 * J2p) / (2.0 * k2)
    J2ppp = (2.0 * J2p + k1 * J2pp) / (2.0 * k2)
    return J2Family(J2, J2p, J2pp, J2ppp, k1, k2)


def _j2_dot(coeffs, fam: J2Family):
    """Sum c_i * d^i J2 / d k1^i for up to four coefficients."""
    vals = (fam.J2, fam.J2p, fam.J2pp, fam.J2ppp)
    out = 0.0
    for c, v in zip(coeffs, vals):
        out = out + c * v
    return out


def inner_integral_closed(s, tau, y_s, y_tau, yp_s, alpha_s, beta_s,
                          rbar_loc_s, rho_loc_s, K, is_put: bool = True):
    """Bracketed integrand [eta(s, y(s)) + J_{1,0}(s)] multiplied by the
    Gaussian history-kernel factor exp(-(y(tau)-y(s))^2 / (4 (tau-s)))
    (the kernel is folded in here so the product stays finite for wild
    root-bracketing probes); the outer 1/sqrt(pi (tau-s)) quadrature
    weight is applied by the caller.

    All arguments may be arrays over s (with scalar tau, y_tau).
    """
    s = np.asarray(s, dtype=float)
    dt = tau - s
    k10 = (y_tau - y_s) / (2.0 * dt)
    k2 = s + 1.0 / (4.0 * dt)
    logE = -((y_tau - y_s) ** 2) / (4.0 * dt)
    sp = s * yp_s            # s * y'(s); callers zero this at s = 0

    if is_put:
        z = K * beta_s * (alpha_s - np.exp(y_s))
        eta = -(2.0 * s + rbar_loc_s) * z - K * beta_s * np.exp(y_s) * rho_loc_s
        a = (rbar_loc_s - rho_loc_s + 2.0 * sp + 6.0 * s,
             2.0 * (s * (2.0 - rbar_loc_s + rho_loc_s) + sp - 6.0 * s * s - 1.0),
             -(1.0 + 12.0 * s * s + 4.0 * s * sp),
             2.0 * s * (4.0 * s * s + 1.0))
        b = (-2.0 * alpha_s * sp,
             2.0 * alpha_s * (1.0 + 6.0 * s * s + s * rbar_loc_s),
             4.0 * alpha_s * s * sp,
             -2.0 * alpha_s * s * (4.0 * s * s + 1.0))
        fam_e = j2_family(k10 + 1.0, k2, logE)     # e^{+xi} group
        egrp = np.exp(y_s)
    else:
        z = K * beta_s * (np.exp(-y_s) - alpha_s)
        eta = -(2.0 * s + rbar_loc_s) * z + K * beta_s * np.exp(-y_s) * rho_loc_s
        a = (rbar_loc_s - rho_loc_s - 2.0 * sp + 6.0 * s,
             2.0 * (s * (rbar_loc_s - rho_loc_s - 2.0) + sp + 6.0 * s * s + 1.0),
             -(1.0 + 12.0 * s * s) + 4.0 * s * sp,
             -2.0 * s * (4.0 * s * s + 1.0))
        b = (2.0 * alpha_s * sp,
             -2.0 * alpha_s * (1.0 + 6.0 * s * s + s * rbar_loc_s),
             -4.0 * alpha_s * s * sp,
             2.0 * alpha_s * s * (4.0 * s * s + 1.0))
        fam_e = j2_family(k10 - 1.0, k2, logE)     # e^{-xi} group
        egrp = np.exp(-y_s)
    fam_0 = j2_family(k10, k2, logE)
    j10 = K * beta_s * (egrp * _j2_dot(a, fam_e) + _j2_dot(b, fam_0))
    return eta * np.exp(logE) + j10


def lambda_cash_div(tau_j, tau, y_j, y_tau, alpha_j, beta_j, K,
                    is_put: bool = True):
    """Closed-form cash-dividend memory term of the boundary equation.

    Returns the value of the half-line integral

        Jdiv = int_{y_j}^inf  (xi - y(tau)) / (2 sqrt(pi D^3))
               * exp(-(xi - y(tau))^2 / (4 D))
               * zeta(tau_j, xi) exp(-tau_j (xi - y_j)^2) dxi,  D = tau - tau_j,

    obtained by integration by parts (boundary term + J2-family moments).
    The derivative-of-the-smooth-value part of the full memory term is
    negligible at the collapse scale and is not included; the residual
    assembles the dividend contribution as +w_j * Jdiv (Put).
    """
    if not tau > tau_j:
        raise ValueError("lambda_cash_div requires tau > tau_j")
    dt = tau - tau_j
    k10 = (y_tau - y_j) / (2.0 * dt)
    k2 = tau_j + 1.0 / (4.0 * dt)
    logE = -((y_j - y_tau) ** 2) / (4.0 * dt)
    norm = 1.0 / np.sqrt(np.pi * dt)
    fam_0 = j2_family(k10, k2, logE)
    if is_put:
        fam_e = j2_family(k10 - 1.0, k2, logE)       # e^{-xi} group
        A = (2.0 * alpha_j * tau_j, -2.0 * alpha_j * tau_j,
             -4.0 * alpha_j * tau_j * tau_j)
        B = (-2.0 * tau_j, -2.0 * tau_j, 4.0 * tau_j * tau_j)
        boundary = 1.0
        egrp = np.exp(-y_j)
    else:
        fam_e = j2_family(k10 + 1.0, k2, logE)       # e^{+xi} group
        A = (-2.0 * alpha_j * tau_j, -2.0 * alpha_j * tau_j,
             4.0 * alpha_j * tau_j * tau_j)
        B = (2.0 * tau_j, 2.0 * tau_j, -4.0 * tau_j * tau_j)
        boundary = -1.0
        egrp = np.exp(y_j)
    braces = boundary * np.exp(logE) + egrp * _j2_dot(A, fam_e) \
        + _j2_dot(B, fam_0)
    return norm * K * beta_j * braces
