import numpy as np
import pytest

from amerdiv.european import price_european, solve_european
from amerdiv.model import MarketModel, OptionSpec


def test_matches_black_scholes_constant_coefficients():
    # oracle: independent Black-Scholes closed form (frozen)
    cases = [
        (("Put", 100, 0.25, 100), dict(r0=0.01, s0=0.6), 11.784219186166133),
        (("Put", 100, 1.0, 100), dict(r0=0.05, q0=0.02, s0=0.2),
         6.330080627549918),
        (("Call", 95, 0.5, 100), dict(r0=0.03, q0=0.01, s0=0.25),
         10.161027671958372),
    ]
    for (kind, K, T, S), mkw, want in cases:
        spec = OptionSpec(kind, K, T, S)
        p = price_european(MarketModel(**mkw), spec)
        assert abs(p - want) < 1e-4 * K


def test_cash_dividend_against_extrapolated_tree():
    # oracle: Richardson-extrapolated 2000/4000-step European lattice (frozen)
    m = MarketModel(r0=0.01, s0=0.3, cash_divs=((0.1, 3.0),))
    p = price_european(m, OptionSpec("Put", 100, 0.25, 100))
    assert abs(p - 7.428183848253444) < 2e-3


def test_proportional_dividend_against_extrapolated_tree():
    # oracle: Richardson-extrapolated 2000/4000-step European lattice (frozen)
    m = MarketModel(r0=0.02, q0=0.01, s0=0.25, prop_divs=((0.3, 0.02),))
    p = price_european(m, OptionSpec("Put", 100, 0.5, 100))
    assert abs(p - 7.6830054848417) < 2e-3


def test_put_call_parity():
    m = MarketModel(r0=0.02, q0=0.01, s0=0.3, sk=1.0,
                    prop_divs=((0.2, 0.01),))
    from amerdiv.model import TimeMap
    spec_p = OptionSpec("Put", 100, 0.5, 105)
    spec_c = OptionSpec("Call", 100, 0.5, 105)
    tm = TimeMap(m, 0.5)
    p = price_european(m, spec_p, tm=tm)
    c = price_european(m, spec_c, tm=tm)
    df = float(tm.df(0.0, 0.5))
    fwd = float(tm.expected_spot(105.0, 0.5))
    assert abs((c - p) - df * (fwd - 100.0)) < 1e-6 * 100


def test_price_monotone_in_strike_and_convex_in_spot():
    m = MarketModel(r0=0.02, s0=0.4)
    T = 0.5
    prices_K = [price_european(m, OptionSpec("Put", K, T, 100.0))
                for K in (90, 95, 100, 105, 110)]
    assert np.all(np.diff(prices_K) > 0)
    prices_S = np.array([price_european(m, OptionSpec("Put", 100, T, S))
                         for S in (80, 90, 100, 110, 120)])
    assert np.all(np.diff(prices_S, 2) > -1e-8 * 100)


def test_strike_sweep_matches_single_strikes():
    # the shared W-curve reprices individual strikes (no cash dividends)
    m = MarketModel(r0=0.02, q0=0.01, s0=0.3)
    sol = solve_european(m, OptionSpec("Put", 100, 0.5, 100))
    strikes = np.array([90.0, 100.0, 115.0])
    swept = sol.price_for_strikes(strikes)
    singles = [price_european(m, OptionSpec("Put", K, 0.5, 100.0))
               for K in strikes]
    assert np.allclose(swept, singles, atol=2e-4 * 100)


def test_strike_sweep_refused_with_cash_dividends():
    m = MarketModel(r0=0.02, s0=0.3, cash_divs=((0.2, 2.0),))
    sol = solve_european(m, OptionSpec("Put", 100, 0.5, 100))
    with pytest.raises(ValueError):
        sol.price_for_strikes(np.array([95.0]))


def test_solver_is_put_based():
    m = MarketModel(r0=0.02, s0=0.3)
    with pytest.raises(ValueError):
        solve_european(m, OptionSpec("Call", 100, 0.5, 100))
