import numpy as np
import pytest

from src.exceptions import ConfigError, DataError
from src.momentum_engine import (LEGS, RebalanceSchedule, SelectionRule, apply_turnover_cap, form_portfolios,
                                 rank_assets, rolling_leg_ratios, run_backtest, scheme_comparison)
from src.risk_metrics import RatioSpec

from tests.conftest import make_panel

SHARPE = SelectionRule(RatioSpec.parse("Sharpe"))
STARR = SelectionRule(RatioSpec.parse("STARR(0.95)"))


# ------------------------------------------
# SELECTION
# ------------------------------------------
def test_schedule_labels():
    assert RebalanceSchedule.from_weeks(2, 2).label() == "2W Form./2W Hold."
    assert RebalanceSchedule(7, 3).label() == "7D Form./3D Hold."
    with pytest.raises(ConfigError):
        RebalanceSchedule(0, 5)


def test_leg_size():
    assert SHARPE.leg_size(10) == 3
    assert SelectionRule(SHARPE.spec, quantile=0.5).leg_size(4) == 2
    with pytest.raises(ConfigError, match="overlap"):
        SelectionRule(SHARPE.spec, quantile=0.5).leg_size(3)
    with pytest.raises(ConfigError):
        SelectionRule(SHARPE.spec, quantile=0.6)


def test_rank_assets_orders_by_score_then_id():
    panel = make_panel([[0.01, 0.02, 0.03], [0.0, 0.0, 0.0], [0.02, 0.01, 0.03], [-0.01, -0.02, -0.01]])
    ranking = rank_assets(panel, RatioSpec.parse("Cumulative Return"))
    assert ranking == ["A01", "A03", "A02", "A04"]


def test_rank_ties_broken_by_id():
    panel = make_panel(np.zeros((4, 5)))
    assert rank_assets(panel, RatioSpec.parse("Sharpe")) == ["A01", "A02", "A03", "A04"]


def test_form_portfolios_equal_weights():
    winners, losers = form_portfolios(["c", "a", "d", "b"], SHARPE, universe=["a", "b", "c", "d"])
    np.testing.assert_array_equal(winners, [0.0, 0.0, 1.0, 0.0])
    np.testing.assert_array_equal(losers, [0.0, 1.0, 0.0, 0.0])


def test_turnover_cap_scales_trade():
    current = np.array([0.5, 0.5, 0.0, 0.0])
    target = np.array([0.0, 0.0, 0.5, 0.5])
    new, turnover = apply_turnover_cap(current, target, 0.04)
    assert turnover == pytest.approx(0.04)
    assert np.abs(new - current).sum() == pytest.approx(0.04)
    assert new.sum() == pytest.approx(1.0)
    uncapped, full = apply_turnover_cap(current, target, None)
    np.testing.assert_array_equal(uncapped, target)
    assert full == pytest.approx(2.0)


# ------------------------------------------
# BACKTEST
# ------------------------------------------
def test_zero_return_panel_gives_flat_wealth():
    panel = make_panel(np.zeros((8, 60)))
    result = run_backtest(panel, RebalanceSchedule(10, 10), SHARPE)
    for leg in LEGS:
        np.testing.assert_array_equal(result.wealth(leg), np.ones(51))
        assert result.final_wealth[leg] == 1.0


def test_turnover_never_exceeds_cap(rng):
    for _ in range(5):
        panel = make_panel(rng.normal(0.0, 0.01, size=(12, 200)))
        result = run_backtest(panel, RebalanceSchedule(10, 5), STARR, turnover_cap=0.04)
        for trade in result.trade_log[1:]:
            assert trade["turnover_winners"] <= 0.04 + 1e-12
            assert trade["turnover_losers"] <= 0.04 + 1e-12
        assert result.trade_log[0]["initial"]


def test_decisions_ignore_future_returns(rng):
    for _ in range(5):
        values = rng.normal(0.0, 0.01, size=(10, 150))
        panel = make_panel(values)
        cut = int(rng.integers(40, 140))
        altered = values.copy()
        altered[:, cut:] = rng.normal(0.0, 0.05, size=(10, 150 - cut))
        full = run_backtest(panel, RebalanceSchedule(20, 10), SHARPE)
        shocked = run_backtest(make_panel(altered), RebalanceSchedule(20, 10), SHARPE)
        truncated = run_backtest(panel.window(0, cut), RebalanceSchedule(20, 10), SHARPE)
        decided = [t for t in full.trade_log if t["date"] <= panel.dates[cut - 1].strftime("%Y-%m-%d")]
        assert decided == shocked.trade_log[:len(decided)]
        assert decided == truncated.trade_log[:len(decided)]
        np.testing.assert_allclose(full.leg_returns["winners"][:cut - 20],
                                   truncated.leg_returns["winners"], rtol=1e-13, atol=1e-16)


def test_spread_wealth_is_additive(random_panel):
    result = run_backtest(random_panel, RebalanceSchedule(10, 10), SHARPE, turnover_cap=None)
    spread = result.leg_returns["winners"] - result.leg_returns["losers"]
    np.testing.assert_allclose(result.wealth_spread[1:], 1.0 + np.cumsum(spread))
    np.testing.assert_allclose(result.wealth_winners[1:], np.cumprod(1.0 + result.leg_returns["winners"]))
    assert result.dates[0] == random_panel.dates[9]


def test_costs_charged_in_first_holding_day(random_panel):
    free = run_backtest(random_panel, RebalanceSchedule(10, 10), SHARPE)
    costly = run_backtest(random_panel, RebalanceSchedule(10, 10), SHARPE, cost_bps=10.0)
    assert costly.leg_returns["winners"][0] == pytest.approx(free.leg_returns["winners"][0] - 0.001)
    assert costly.leg_returns["winners"][1] == free.leg_returns["winners"][1]


def test_backtest_needs_enough_dates(random_panel):
    with pytest.raises(DataError, match="need at least"):
        run_backtest(random_panel.window(0, 15), RebalanceSchedule(10, 10), SHARPE)


def test_holding_period_returns_compound(random_panel):
    result = run_backtest(random_panel, RebalanceSchedule(20, 20), SHARPE)
    hpr = result.holding_period_returns()
    assert len(hpr["winners"]) == len(result.holding_windows) == 5
    start, stop = result.holding_windows[0]
    assert hpr["winners"][0] == pytest.approx(np.prod(1.0 + result.leg_returns["winners"][start:stop]) - 1.0)
    assert hpr["momentum"][0] == pytest.approx(result.leg_returns["momentum"][start:stop].sum())


# ------------------------------------------
# SCHEME COMPARISON
# ------------------------------------------
def test_scheme_comparison_marks_one_best_per_rule(random_panel):
    schedules = [RebalanceSchedule.from_weeks(1, 1), RebalanceSchedule.from_weeks(2, 2),
                 RebalanceSchedule.from_weeks(4, 2)]
    table, cells = scheme_comparison(random_panel, schedules, [SHARPE, STARR])
    assert len(table) == 3 * 2 * len(LEGS)
    assert len(cells) == 6
    for rule, group in table.groupby("rule"):
        best = group[group["best"]]
        assert len(best) == 1
        momentum = group[group["leg"] == "momentum"]
        assert best["terminal_wealth"].iloc[0] == momentum["terminal_wealth"].max()


def test_scheme_comparison_parallel_matches_serial(random_panel):
    schedules = [RebalanceSchedule.from_weeks(1, 1), RebalanceSchedule.from_weeks(2, 1)]
    serial, _ = scheme_comparison(random_panel, schedules, [SHARPE, STARR], max_workers=1)
    pooled, _ = scheme_comparison(random_panel, schedules, [SHARPE, STARR], max_workers=4)
    assert serial.equals(pooled)


def test_rolling_leg_ratios(random_panel):
    result = run_backtest(random_panel, RebalanceSchedule(10, 10), SHARPE)
    table = rolling_leg_ratios(result, [RatioSpec.parse("Sharpe")], window=30)
    assert set(table["series"]) == set(LEGS)
    assert len(table) == len(LEGS) * (110 - 30 + 1)
