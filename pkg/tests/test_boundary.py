import numpy as np
import pytest

from amerdiv.boundary import eb_asymptote, solve_boundary
from amerdiv.model import MarketModel, OptionSpec


def test_terminal_node_and_monotone_start():
    m = MarketModel(r0=0.01, s0=0.6)
    spec = OptionSpec("Put", 100, 0.25, 100)
    curve = solve_boundary(m, spec, N=50)
    assert curve.exists
    assert curve.node_ok.all()
    assert np.isclose(curve.S_B[0], 100.0)       # S_B -> K at expiry (q < r)
    assert np.all(np.diff(curve.S_B[:20]) < 0)   # falls away from expiry


def test_frozen_table1_values():
    # frozen solver output (regression anchors; independently matched by
    # the 1600-step lattice boundary to < 0.25 in test_acceptance)
    m = MarketModel(r0=0.01, s0=0.6)
    curve = solve_boundary(m, OptionSpec("Put", 100, 0.25, 100), N=100)
    ref = {1: 90.63273557962953, 50: 57.27426214338999}
    for idx, want in ref.items():
        assert abs(curve.S_B[idx] - want) < 1e-4
    assert 45.0 < curve.S_B[-1] < 50.0


def test_put_negative_rate_no_boundary():
    m = MarketModel(r0=-0.01, s0=0.6)
    curve = solve_boundary(m, OptionSpec("Put", 100, 0.25, 100), N=50)
    assert not curve.exists
    assert curve.status == "no_boundary"
    assert np.isnan(curve.S_B).all()


def test_call_no_carry_no_boundary():
    m = MarketModel(r0=0.01, s0=0.6)
    curve = solve_boundary(m, OptionSpec("Call", 100, 0.25, 100), N=50)
    assert not curve.exists


def test_call_with_heavy_yield_has_boundary():
    m = MarketModel(r0=0.01, q0=0.05, s0=0.3)
    curve = solve_boundary(m, OptionSpec("Call", 100, 0.5, 100), N=50)
    assert curve.exists
    assert np.isclose(curve.S_B[0], 100.0)       # terminal node at the strike
    assert np.nanmin(curve.S_B[1:]) > 100.0      # call boundary above strike


def test_cash_dividend_jumps_down_across_ex_date():
    m = MarketModel(r0=0.01, s0=0.6,
                    cash_divs=((0.07, 5.0), (0.12, 4.0), (0.17, 3.0),
                               (0.22, 2.0)))
    curve = solve_boundary(m, OptionSpec("Put", 100, 0.25, 100), N=100)
    div_nodes = np.nonzero(curve.div_flags)[0]
    assert len(div_nodes) == 4
    for k in div_nodes:
        step_div = np.log(curve.S_B[k] / curve.S_B[k + 1])
        step_smooth = np.log(curve.S_B[k - 1] / curve.S_B[k])
        assert step_div > 5.0 * step_smooth      # clear discontinuity


def test_boundary_csv_round_trip(tmp_path):
    m = MarketModel(r0=0.01, s0=0.6)
    curve = solve_boundary(m, OptionSpec("Put", 100, 0.25, 100), N=50)
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    import csv
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(curve.tau)
    assert set(rows[0]) == {"t", "tau", "y", "S_B", "status",
                            "is_dividend_node"}
    assert np.isclose(float(rows[0]["S_B"]), curve.S_B[0])


def test_eb_asymptote_shape():
    tau = np.array([1e-6, 1e-4, 1e-3])
    y = eb_asymptote(tau, 0.1)
    assert (y <= 0.0).all()
    assert y[0] > y[-1]            # deepens with tau


def test_value_at_tau_interpolation():
    m = MarketModel(r0=0.01, s0=0.6)
    curve = solve_boundary(m, OptionSpec("Put", 100, 0.25, 100), N=50)
    mid = 0.5 * (curve.tau[3] + curve.tau[4])
    v = curve.value_at_tau(mid)
    assert min(curve.S_B[3], curve.S_B[4]) <= v <= max(curve.S_B[3],
                                                       curve.S_B[4])
