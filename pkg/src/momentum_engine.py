"""
Formation/holding momentum backtests: rank by a reward-risk ratio, hold the
top and bottom quantiles under a turnover cap and account wealth per leg
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.data_model import SUMMARY_COLUMNS, ReturnPanel, equal_weight_benchmark, summary_stats
from src.exceptions import ConfigError, DataError, ZeroVarianceError
from src.logger_utils import ColoredLogger as log
from src.risk_metrics import RatioSpec, ratio_scores, rolling_frame, rolling_ratio

LEGS = ("winners", "losers", "momentum", "benchmark")


@dataclass(frozen=True)
class RebalanceSchedule:
    formation_days: int
    holding_days: int

    def __post_init__(self):
        if int(self.formation_days) < 1 or int(self.holding_days) < 1:
            raise ConfigError("formation and holding periods must be at least one day")
        object.__setattr__(self, "formation_days", int(self.formation_days))
        object.__setattr__(self, "holding_days", int(self.holding_days))

    @classmethod
    def from_weeks(cls, formation_weeks, holding_weeks, days_per_week=5):
        return cls(formation_weeks * days_per_week, holding_weeks * days_per_week)

    def label(self, days_per_week=5):
        """'2W Form./2W Hold.' when both lengths are whole weeks"""
        f, h = self.formation_days, self.holding_days
        if f % days_per_week == 0 and h % days_per_week == 0:
            return f"{f // days_per_week}W Form./{h // days_per_week}W Hold."
        return f"{f}D Form./{h}D Hold."


@dataclass(frozen=True)
class SelectionRule:
    spec: RatioSpec
    quantile: float = 0.25
    weighting: str = "equal"

    def __post_init__(self):
        if not (0.0 < float(self.quantile) <= 0.5):
            raise ConfigError(f"quantile must lie in (0, 0.5], got {self.quantile}")
        if self.weighting != "equal":
            raise ConfigError(f"unsupported weighting {self.weighting!r}")

    def leg_size(self, n_assets):
        """m = ceil(quantile * N); both legs must fit without overlap"""
        m = math.ceil(self.quantile * n_assets - 1e-12)
        if m < 1:
            raise ConfigError(f"quantile {self.quantile} selects no asset out of {n_assets}")
        if 2 * m > n_assets:
            raise ConfigError(f"winner and loser legs overlap: {m} per leg out of {n_assets} assets")
        return m


@dataclass
class BacktestResult:
    """
    Wealth paths start at 1 on the date before the first holding period.
    The momentum (spread) path accrues winner-minus-loser returns additively.
    """
    dates: pd.DatetimeIndex
    wealth_winners: np.ndarray
    wealth_losers: np.ndarray
    wealth_spread: np.ndarray
    wealth_benchmark: np.ndarray
    leg_returns: Dict[str, np.ndarray]
    trade_log: List[dict] = field(default_factory=list)
    holding_windows: List[tuple] = field(default_factory=list)

    def wealth(self, leg):
        return {"winners": self.wealth_winners, "losers": self.wealth_losers,
                "momentum": self.wealth_spread, "benchmark": self.wealth_benchmark}[leg]

    @property
    def final_wealth(self):
        """Terminal value of each path (unit initial capital)"""
        return {leg: float(self.wealth(leg)[-1]) for leg in LEGS}

    @property
    def realized_profit(self):
        return {leg: v - 1.0 for leg, v in self.final_wealth.items()}

    def wealth_frame(self):
        frame = pd.DataFrame({leg: self.wealth(leg) for leg in LEGS}, index=self.dates)
        frame.index.name = "date"
        return frame

    def final_table(self):
        final, profit = self.final_wealth, self.realized_profit
        return pd.DataFrame({"leg": list(LEGS),
                             "terminal_wealth": [final[leg] for leg in LEGS],
                             "realized_profit": [profit[leg] for leg in LEGS]})

    def holding_period_returns(self):
        """Per holding window: compounded leg returns, additive spread"""
        out = {leg: [] for leg in LEGS}
        for start, stop in self.holding_windows:
            for leg in ("winners", "losers", "benchmark"):
                out[leg].append(float(np.prod(1.0 + self.leg_returns[leg][start:stop]) - 1.0))
            out["momentum"].append(float(np.sum(self.leg_returns["momentum"][start:stop])))
        return {leg: np.asarray(v) for leg, v in out.items()}


# ------------------------------------------
# RANKING AND SELECTION
# ------------------------------------------
def _order(scores, asset_ids):
    return sorted(range(len(asset_ids)), key=lambda i: (-scores[i], asset_ids[i]))


def rank_assets(panel: ReturnPanel, spec: RatioSpec) -> List[str]:
    """Asset ids by descending score over the whole window; ties in id order"""
    if panel.n_dates == 0:
        raise DataError("empty ranking window")
    scores = ratio_scores(panel.returns, spec)
    return [panel.asset_ids[i] for i in _order(scores, list(panel.asset_ids))]


def form_portfolios(ranking: Sequence[str], rule: SelectionRule, universe: Optional[Sequence[str]] = None):
    """
    Equal weights 1/m on the first and last m ids of the ranking.

    Returns:
        (winner weights, loser weights) aligned to universe (default: ranking order)
    """
    ranking = list(ranking)
    if not ranking:
        raise DataError("empty ranking")
    m = rule.leg_size(len(ranking))
    universe = list(universe) if universe is not None else ranking
    index = {a: i for i, a in enumerate(universe)}
    winners = np.zeros(len(universe))
    losers = np.zeros(len(universe))
    winners[[index[a] for a in ranking[:m]]] = 1.0 / m
    losers[[index[a] for a in ranking[-m:]]] = 1.0 / m
    return winners, losers


def apply_turnover_cap(current, target, cap):
    """
    Move from current toward target; the trade is scaled down so that
    sum |w_new - w_old| <= cap.

    Returns:
        (new weights, turnover)
    """
    delta = np.asarray(target, dtype=float) - np.asarray(current, dtype=float)
    turnover = float(np.abs(delta).sum())
    if cap is None or turnover <= cap:
        return np.asarray(target, dtype=float).copy(), turnover
    scale = cap / turnover
    return current + delta * scale, float(cap)


# ------------------------------------------
# BACKTEST
# ------------------------------------------
def run_backtest(panel: ReturnPanel, schedule: RebalanceSchedule, rule: SelectionRule,
                 turnover_cap=0.04, cost_bps=0.0) -> BacktestResult:
    """
    Args:
        panel: Return panel (N assets x T dates)
        schedule: Formation/holding lengths in trading days
        rule: Ranking ratio and leg quantile
        turnover_cap: Max sum of |weight changes| per rebalance (None or inf = uncapped);
            the initial portfolio build is exempt
        cost_bps: Cost per unit of turnover in basis points, charged in the first holding period
    """
    n, t_len = panel.returns.shape
    f, h = schedule.formation_days, schedule.holding_days
    if t_len < f + h:
        raise DataError(f"need at least {f + h} dates for {schedule.label()}, got {t_len}")
    if cost_bps < 0:
        raise ConfigError("cost_bps must be nonnegative")
    if turnover_cap is not None and turnover_cap < 0:
        raise ConfigError("turnover cap must be nonnegative")
    cap = None if turnover_cap is None or math.isinf(turnover_cap) else float(turnover_cap)
    m = rule.leg_size(n)

    ids = list(panel.asset_ids)
    r = panel.returns
    periods = t_len - f
    r_win = np.empty(periods)
    r_los = np.empty(periods)
    w_win = w_los = None
    trade_log, windows = [], []
    cost_rate = cost_bps / 1e4

    for t0 in range(f, t_len, h):
        stop = min(t0 + h, t_len)
        scores = ratio_scores(r[:, t0 - f:t0], rule.spec)
        ranking = [ids[i] for i in _order(scores, ids)]
        target_w, target_l = form_portfolios(ranking, rule, universe=ids)
        initial = w_win is None
        if initial:
            w_win, w_los = target_w, target_l
            turn_w = turn_l = 1.0
        else:
            w_win, turn_w = apply_turnover_cap(w_win, target_w, cap)
            w_los, turn_l = apply_turnover_cap(w_los, target_l, cap)

        block = r[:, t0:stop]
        r_win[t0 - f:stop - f] = w_win @ block
        r_los[t0 - f:stop - f] = w_los @ block
        cost_w, cost_l = cost_rate * turn_w, cost_rate * turn_l
        r_win[t0 - f] -= cost_w
        r_los[t0 - f] -= cost_l

        trade_log.append({
            "date": panel.dates[t0].strftime("%Y-%m-%d"),
            "initial": initial,
            "winners": ranking[:m],
            "losers": ranking[-m:],
            "turnover_winners": turn_w,
            "turnover_losers": turn_l,
            "cost": cost_w + cost_l,
        })
        windows.append((t0 - f, stop - f))

    r_spread = r_win - r_los
    r_bench = equal_weight_benchmark(panel)[f:]
    ones = np.ones(1)
    return BacktestResult(
        dates=panel.dates[f - 1:],
        wealth_winners=np.concatenate([ones, np.cumprod(1.0 + r_win)]),
        wealth_losers=np.concatenate([ones, np.cumprod(1.0 + r_los)]),
        wealth_spread=np.concatenate([ones, 1.0 + np.cumsum(r_spread)]),
        wealth_benchmark=np.concatenate([ones, np.cumprod(1.0 + r_bench)]),
        leg_returns={"winners": r_win, "losers": r_los, "momentum": r_spread, "benchmark": r_bench},
        trade_log=trade_log,
        holding_windows=windows,
    )


def _moments(x):
    x = np.asarray(x, dtype=float)
    nan = float("nan")
    if x.size < 4:
        mean = float(x.mean()) if x.size else nan
        std = float(x.std(ddof=1)) if x.size > 1 else nan
        return {"Mean": mean, "Std. Dev.": std, "Skewness": nan, "Kurtosis": nan}
    try:
        return summary_stats(x).as_row()
    except ZeroVarianceError:
        return {"Mean": float(x.mean()), "Std. Dev.": 0.0, "Skewness": nan, "Kurtosis": nan}


def scheme_comparison(panel: ReturnPanel, schedules: Sequence[RebalanceSchedule], rules: Sequence[SelectionRule],
                      turnover_cap=0.04, cost_bps=0.0, max_workers=1, days_per_week=5):
    """
    One row per (scheme, rule, leg): moments of holding-period returns, terminal
    wealth and realized profit. `best` marks the momentum row of the scheme with
    the highest momentum terminal wealth for each rule.

    Returns:
        (table DataFrame, {(scheme label, rule label): BacktestResult})
    """
    cells = [(s, rule) for rule in rules for s in schedules]

    def run(cell):
        s, rule = cell
        return run_backtest(panel, s, rule, turnover_cap, cost_bps)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    rows, by_cell = [], {}
    for (s, rule), res in zip(cells, results):
        scheme, rule_label = s.label(days_per_week), rule.spec.label
        by_cell[(scheme, rule_label)] = res
        hpr = res.holding_period_returns()
        if len(res.holding_windows) < 4:
            log.log("backtest", f"{scheme} / {rule_label}: only {len(res.holding_windows)} holding periods, "
                                "higher moments undefined", 'WARNING')
        final, profit = res.final_wealth, res.realized_profit
        for leg in LEGS:
            row = {"scheme": scheme, "rule": rule_label, "leg": leg}
            row.update(_moments(hpr[leg]))
            row.update({"terminal_wealth": final[leg], "realized_profit": profit[leg]})
            rows.append(row)

    columns = ["scheme", "rule", "leg"] + SUMMARY_COLUMNS + ["terminal_wealth", "realized_profit"]
    table = pd.DataFrame(rows, columns=columns)
    table["best"] = False
    spread = table[table["leg"] == "momentum"]
    for _, group in spread.groupby("rule", sort=False):
        table.loc[group["terminal_wealth"].idxmax(), "best"] = True
    return table, by_cell


def rolling_leg_ratios(result: BacktestResult, specs: Sequence[RatioSpec], window: int):
    """Long table of trailing-window ratios on each leg's period returns"""
    dates = result.dates[1:]
    frames = []
    for spec in specs:
        series = {leg: rolling_ratio(result.leg_returns[leg], spec, window, dates=dates) for leg in LEGS}
        frames.append(rolling_frame(series, spec))
    return pd.concat(frames, ignore_index=True)
