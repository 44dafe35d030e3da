"""End-to-end acceptance suite.

Each test states its oracle: closed forms implemented independently
inside the test, the built-in lattice, or a measured convergence rate.
"""

import time

import numpy as np
import pytest

from amerdiv.baseline import tree_boundary, tree_price
from amerdiv.boundary import solve_boundary
from amerdiv.density import DensityPath
from amerdiv.deamericanize import implied_sigma
from amerdiv.european import price_european
from amerdiv.kernels import approx_I2, numeric_I2
from amerdiv.model import MarketModel, OptionSpec, TimeMap
from amerdiv.pricer import price_american
from amerdiv.volterra import weak_quad

TEST1 = MarketModel(r0=0.01, s0=0.6)
TEST1_SPEC = OptionSpec("Put", 100.0, 0.25, 100.0)


def test_01_european_matches_black_scholes():
    # oracle: independent Black-Scholes closed form, written inline
    from scipy.stats import norm
    S = K = 100.0
    r, sig, T = 0.01, 0.6, 0.25
    d1 = (np.log(S / K) + (r + sig * sig / 2) * T) / (sig * np.sqrt(T))
    d2 = d1 - sig * np.sqrt(T)
    bs = K * np.exp(-r * T) * norm.cdf(-d2) - S * norm.cdf(-d1)
    t0 = time.time()
    p = price_european(TEST1, TEST1_SPEC)
    elapsed = time.time() - t0
    assert abs(p - bs) < 1e-4 * K
    assert elapsed < 1.0


def test_02_I2_approximation_sub_cent():
    xs = np.linspace(-3.0, 3.0, 200)
    t0 = time.time()
    for tau in (0.02, 0.125, 0.3):
        err = np.max(np.abs(approx_I2(xs, tau) - numeric_I2(xs, tau)))
        assert err < 0.01, f"tau={tau}: err={err}"
    assert time.time() - t0 < 5.0


def test_03_boundary_agrees_with_lattice():
    # oracle: 1600-step lattice boundary (3000 recorded space resolution)
    t0 = time.time()
    curve = solve_boundary(TEST1, TEST1_SPEC, N=50)
    git_time = time.time() - t0
    t0 = time.time()
    tr = tree_boundary(TEST1, TEST1_SPEC, n_time=1600, n_space=3000)
    tree_time = time.time() - t0
    assert curve.exists
    good = np.isfinite(tr.boundary)
    order = np.argsort(curve.t)
    # exclude the 3 solver nodes closest to expiry (lattice noise there)
    t_q = curve.t[order][:-3]
    s_q = curve.S_B[order][:-3]
    tree_q = np.interp(t_q, tr.times[good], tr.boundary[good])
    max_dev = np.max(np.abs(s_q - tree_q)) / TEST1_SPEC.strike
    assert max_dev < 0.01
    assert git_time < 5.0
    assert tree_time < 60.0


def test_04_boundary_grid_stability():
    curves = {N: solve_boundary(TEST1, TEST1_SPEC, N=N)
              for N in (50, 100, 200)}
    for Na, Nb in ((50, 100), (100, 200)):
        a, b = curves[Na], curves[Nb]
        step = Nb // Na
        diff = np.abs(a.S_B - b.S_B[::step])
        assert np.max(diff) < 0.2e-2 * TEST1_SPEC.strike, \
            f"N={Na}->{Nb}: max change {np.max(diff)}"


def test_05_degenerate_regimes_collapse_to_european():
    t0 = time.time()
    m_put = MarketModel(r0=-0.01, s0=0.6)
    rep = price_american(m_put, TEST1_SPEC, N=50)
    assert rep.boundary_status == "no_boundary"
    assert abs(rep.price - rep.european) < 1e-8 * TEST1_SPEC.strike

    m_call = MarketModel(r0=0.01, s0=0.6)
    rep = price_american(m_call, OptionSpec("Call", 100.0, 0.25, 100.0),
                         N=50)
    assert rep.boundary_status == "no_boundary"
    assert abs(rep.price - rep.european) < 1e-8 * 100.0
    assert time.time() - t0 < 2.0


def test_06_density_tracks_first_moment():
    # oracle: scalar first-moment ODE solution (growth by int a between
    # events, minus cash amounts, times e^{-d} at proportional dates)
    m = MarketModel(r0=0.03, q0=0.01, s0=0.3, sk=1.0,
                    cash_divs=((0.1, 2.0),), prop_divs=((0.25, 0.015),))
    T = 0.4
    tm = TimeMap(m, T)
    dp = DensityPath(m, 100.0, T, tm=tm)
    checkpoints = np.linspace(0.02, T, 20)
    for t in checkpoints:
        want = float(tm.expected_spot(100.0, t))
        got = dp.mean(float(t))
        assert abs(got - want) / want < 2e-3, f"t={t}"
        assert abs(dp.mass(float(t)) - 1.0) < 1e-8, f"t={t}"


def test_07_cash_dividend_boundary_jumps():
    spec = TEST1_SPEC
    divs = ((0.07, 5.0), (0.12, 4.0), (0.17, 3.0), (0.22, 2.0))

    def jumps(scale):
        m = MarketModel(r0=0.01, s0=0.6,
                        cash_divs=tuple((t, scale * d) for t, d in divs))
        curve = solve_boundary(m, spec, N=100)
        assert curve.exists
        out = []
        for k in np.nonzero(curve.div_flags)[0]:
            # log-drop across the ex-date node, net of the smooth step
            step_div = np.log(curve.S_B[k] / curve.S_B[k + 1])
            step_smooth = np.log(curve.S_B[k - 1] / curve.S_B[k])
            out.append(step_div - step_smooth)
        return np.array(out)

    full = jumps(1.0)
    tenth = jumps(0.1)
    assert len(full) == 4
    # post-date (tau-side) value below pre-date: positive net drop, well
    # beyond the neighbouring smooth variation
    assert (full > 0).all()
    assert (tenth > 0).all()
    # 10x smaller dividends shrink every jump
    assert (tenth < full).all()


def test_08_american_price_matches_shift_tree():
    # oracle: 3000-step lattice, shift dividend handling
    cash = ((0.07, 5.0), (0.12, 4.0), (0.17, 3.0), (0.22, 2.0))
    prop = ((0.08, 0.01), (0.13, 0.01), (0.18, 0.01), (0.23, 0.01))
    spec = TEST1_SPEC
    regimes = {"none": ((), ()), "cash": (cash, ()), "prop": ((), prop),
               "both": (cash, prop)}
    for r0 in (-0.01, 0.01, 0.05):
        for name, (cd, pd) in regimes.items():
            m = MarketModel(r0=r0, q0=0.02, q1=-0.01, qk=0.1, s0=0.3,
                            sk=2.0, cash_divs=cd, prop_divs=pd)
            rep = price_american(m, spec, N=100)
            tr = tree_price(m, spec, n_time=3000,
                            dividend_mode="shift").price
            assert abs(rep.price - tr) < 1.5e-2 * spec.strike, \
                f"r={r0} {name}: {rep.price} vs {tr}"


def test_09_implied_sigma_round_trip():
    r, q, T = 0.02, 0.01, 0.5
    quotes = []
    for sigma in (0.2, 0.3, 0.4, 0.5):
        m = MarketModel(r0=r, q0=q, s0=sigma)
        for K in (90.0, 95.0, 100.0, 105.0, 110.0):
            spec = OptionSpec("Put", K, T, 100.0)
            quotes.append((m, spec, sigma,
                           price_american(m, spec, N=50).price))
    assert len(quotes) == 20
    for m, spec, sigma, quote in quotes:
        res = implied_sigma(quote, m, spec, N=50)
        assert abs(res.sigma_bar - sigma / np.sqrt(2.0)) < 1e-5
        flat = MarketModel(r0=m.r0, q0=m.q0,
                           s0=res.sigma_bar * np.sqrt(2.0))
        reprice = price_american(flat, spec, N=50).price
        assert abs(reprice - quote) < 1e-6 * spec.strike


def test_10_weak_quad_convergence_rate():
    # manufactured smooth integrand with known quadrature value (frozen)
    exact = 0.48778413316557584
    gfun = lambda s: np.cos(3 * s) + 0.5 * s
    yfun = lambda s: -0.3 * np.sqrt(s + 0.01) - 0.2 * s
    errs = {}
    for N in (50, 100, 200):
        taus = np.linspace(0.0, 0.2, N + 1)
        h = gfun(taus).copy()
        dt = taus[-1] - taus[:-1]
        h[:-1] = gfun(taus[:-1]) * np.exp(
            -(yfun(taus[-1]) - yfun(taus[:-1])) ** 2 / (4.0 * dt))
        errs[N] = abs(weak_quad(N, h, taus) - exact)
    for Na, Nb in ((50, 100), (100, 200)):
        rate = np.log2(errs[Na] / errs[Nb])
        assert rate >= 1.9, f"rate {Na}->{Nb}: {rate}"
