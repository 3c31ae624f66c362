"""
Stage runner: ingest -> pca -> backtest -> regimes -> dp -> simulate -> frontier.
Every stage reads its inputs from the output directory and writes its artifacts there,
so a stage can be rerun on its own.
"""
import json
import time

import numpy as np
import pandas as pd

import config as cfg
from src.data_model import (CsvSchema, MissingPolicy, SUMMARY_COLUMNS, equal_weight_benchmark, load_price_csv,
                            load_return_csv, panel_to_frame, summary_stats, to_arithmetic_returns)
from src.dp_allocator import (DPModel, UtilitySpec, default_grid, gauss_hermite_rule, policy_vs_constant_benchmarks,
                              read_surfaces, simulate_wealth, solve_bellman, wealth_summary, write_surfaces)
from src.exceptions import ConfigError, DataError, NumericError, StageError
from src.factor_engine import explained_variance, fit_pca, project_scores
from src.frontier import capital_market_line, cvar_frontier, mv_frontier, scenarios_from_history
from src.logger_utils import ColoredLogger as log
from src.momentum_engine import (RebalanceSchedule, SelectionRule, rolling_leg_ratios, scheme_comparison)
from src.regime_model import (RegimePricing, TransitionMatrix, bundled_state, estimate_transitions, hmm_fit,
                              load_bundled_parameters, load_bundled_transitions, load_regime_labels,
                              stationary_distribution, write_regime_labels)
from src.risk_metrics import RatioSpec
from src.run_config import RunConfig
from src.report_writer import ArtifactWriter
from src.stage_monitor import StageMonitor
from src.synthetic import SyntheticSpec, generate_synthetic
from src.vol_models import (FIGARCH_FIELDS, GjrStateParams, arfima_figarch_fit, arma_garch_filter, arma_garch_fit,
                            figarch_start, forward_ratio_series, nig_fit_moments)

STAGES = ("ingest", "pca", "backtest", "regimes", "dp", "simulate", "frontier")
DP_LEGS = ("winners", "losers", "momentum")
FIGARCH_COLUMNS = ["leg", "source"] + list(FIGARCH_FIELDS) + ["loglik", "aic", "bic", "n_obs", "converged"]


def _dated(frame):
    frame = frame.copy()
    frame.index = pd.DatetimeIndex(frame.index).strftime("%Y-%m-%d")
    frame.index.name = "date"
    return frame


def _level_tag(level):
    return f"{int(round(float(level) * 100)):02d}"


class Pipeline:
    """Runs stages against one output directory, tracking them in manifest.json"""

    def __init__(self, run_config: RunConfig):
        self.cfg = run_config
        self.writer = ArtifactWriter(run_config.output_dir)
        self.monitor = StageMonitor(run_config.output_dir)
        self._started = False

    # ------------------------------------------
    # DRIVER
    # ------------------------------------------
    def begin(self):
        if not self._started:
            self.cfg.validate()
            self.monitor.begin_run(self.cfg.to_document(), self.cfg.inputs_hash(), self.cfg.seed)
            self._started = True

    def run_stage(self, name, index=1, total=1):
        if name not in STAGES:
            raise ConfigError(f"unknown stage {name!r}; expected one of {list(STAGES)}")
        self.begin()
        log.log_separator(f"STAGE {index}/{total}: {name.upper()}")
        log.log_stage(name, index, total, 'RUNNING')
        self.monitor.start_stage(name)
        self.writer.take_written()
        started = time.perf_counter()
        try:
            getattr(self, f"stage_{name}")()
        except Exception as e:
            self.monitor.mark_failed(name, e)
            log.log_stage(name, index, total, 'FAILED', time.perf_counter() - started)
            if isinstance(e, StageError):
                raise
            raise StageError(name, e) from e
        seconds = time.perf_counter() - started
        self.monitor.mark_completed(name, self.writer.take_written(), seconds)
        log.log_stage(name, index, total, 'COMPLETED', seconds)

    def run(self, stages=STAGES):
        """Stages in order; the first failure stops the run"""
        stages = list(stages)
        for i, name in enumerate(stages, start=1):
            self.run_stage(name, i, len(stages))
        log.log_status(f"Pipeline finished: {len(stages)} stage(s) in {self.cfg.output_dir}", 'SUCCESS')
        return self.cfg.output_dir

    # ------------------------------------------
    # SHARED READERS
    # ------------------------------------------
    def _schema(self):
        data = self.cfg["data"]
        return CsvSchema(date_column=data["date_column"], missing=MissingPolicy.parse(data["missing_policy"]))

    def returns_panel(self):
        return load_return_csv(self.writer.path("returns.csv"))

    def ranking_panel(self):
        """Factor-score portfolios or the raw assets, per pca.universe"""
        if self.cfg["pca"]["universe"] == "factors":
            return load_return_csv(self.writer.path("factor_scores.csv"))
        return self.returns_panel()

    def leg_returns(self):
        return self.writer.read_csv("leg_returns.csv")

    def transitions(self):
        data = self.writer.read_json("transitions.json")
        return {leg: TransitionMatrix(np.asarray(entry["p"], dtype=float)) for leg, entry in data.items()}

    def leg_parameters(self, leg):
        """(GjrStateParams, RegimePricing) from dp.parameters or the bundled table"""
        dp = self.cfg["dp"]
        custom = (dp.get("parameters") or {}).get(leg)
        if custom:
            try:
                state = GjrStateParams(omega=custom["omega"], beta=custom["beta"], alpha=custom["alpha"],
                                       leverage=custom.get("leverage", dp["leverage"]))
                pricing = RegimePricing(custom["lambda0"], custom["lambda1"])
            except KeyError as e:
                raise ConfigError(f"dp.parameters.{leg} is missing {e}")
            return state, pricing
        bundled = load_bundled_parameters()
        if leg not in bundled:
            raise ConfigError(f"no parameters for leg {leg!r}")
        return bundled_state(bundled[leg], dp["leverage"]), bundled[leg]["pricing"]

    # ------------------------------------------
    # STAGES
    # ------------------------------------------
    def stage_ingest(self):
        inputs = self.cfg["inputs"]
        if inputs.get("prices"):
            panel = to_arithmetic_returns(load_price_csv(inputs["prices"], self._schema()))
        elif inputs.get("returns"):
            panel = load_return_csv(inputs["returns"], self._schema())
        else:
            syn = self.cfg["synthetic"]
            spec = SyntheticSpec.from_bundled(syn["leg"], int(syn["assets"]), int(syn["horizon"]),
                                              leverage=float(self.cfg["dp"]["leverage"]),
                                              factor_share=float(syn["factor_share"]), start=syn["start"],
                                              span=float(self.cfg["dp"]["grid_span"]))
            data = generate_synthetic(spec, self.cfg.seed)
            panel = data.returns
            self.writer.write_csv("prices.csv", _dated(panel_to_frame(data.prices)), index=True)
            write_regime_labels(data.regimes, self.writer.path("regimes.csv"))
            self.writer.record("regimes.csv")

        self.writer.write_csv("returns.csv", _dated(panel_to_frame(panel)), index=True)
        series = {a: panel.series(a) for a in panel.asset_ids}
        series["benchmark"] = equal_weight_benchmark(panel)
        rows = []
        for name, x in series.items():
            try:
                row = summary_stats(x).as_row()
            except DataError as e:
                log.log("ingest", f"{name}: {e.message}", 'WARNING')
                row = {c: float("nan") for c in SUMMARY_COLUMNS}
            rows.append({"series": name, **row})
        self.writer.write_csv("summary.csv", pd.DataFrame(rows, columns=["series"] + SUMMARY_COLUMNS))
        log.log("ingest", f"{panel.n_assets} assets x {panel.n_dates} return dates", 'SUCCESS')

    def stage_pca(self):
        pca = self.cfg["pca"]
        panel = self.returns_panel()
        k = min(int(pca["components"]), panel.n_assets)
        if k < int(pca["components"]):
            log.log("pca", f"{pca['components']} components requested, {panel.n_assets} assets: keeping {k}", 'WARNING')
        model = fit_pca(panel, k, correlation=bool(pca["correlation"]))
        shares = explained_variance(model)
        scores = project_scores(model, panel)
        self.writer.write_json("pca_model.json", json.loads(model.to_json()))
        self.writer.write_csv("explained_variance.csv", shares)
        columns = [f"F{i + 1:02d}" for i in range(model.k)]
        frame = pd.DataFrame(scores.scores, index=panel.dates, columns=columns)
        self.writer.write_csv("factor_scores.csv", _dated(frame), index=True)
        log.log("pca", f"First component explains {float(shares['share'].iloc[0]):.1%} of variance", 'SUCCESS')

    def stage_backtest(self):
        bt = self.cfg["backtest"]
        panel = self.ranking_panel()
        days = int(bt["days_per_week"])
        schedules = [RebalanceSchedule.from_weeks(f, h, days) for f, h in bt["schemes_weeks"]]
        rules = [SelectionRule(RatioSpec.parse(r), float(bt["quantile"])) for r in bt["ratios"]]
        cap = None if bt["turnover_cap"] is None else float(bt["turnover_cap"])
        table, by_cell = scheme_comparison(panel, schedules, rules, cap, float(bt["cost_bps"]),
                                           max_workers=self.cfg.workers, days_per_week=days)
        self.writer.write_csv("scheme_table.csv", table)
        self.writer.write_csv("final_wealth.csv",
                              table[["scheme", "rule", "leg", "terminal_wealth", "realized_profit", "best"]])

        primary_rule = rules[0].spec.label
        paths = []
        for s in schedules:
            res = by_cell[(s.label(days), primary_rule)]
            frame = _dated(res.wealth_frame()).reset_index()
            frame.insert(1, "scheme", s.label(days))
            paths.append(frame)
        self.writer.write_csv("wealth_paths.csv", pd.concat(paths, ignore_index=True))

        primary = by_cell[(schedules[0].label(days), primary_rule)]
        self.writer.write_json("trade_log.json", {"scheme": schedules[0].label(days), "rule": primary_rule,
                                                  "rebalances": primary.trade_log})
        legs = pd.DataFrame(primary.leg_returns, index=primary.dates[1:])
        self.writer.write_csv("leg_returns.csv", _dated(legs), index=True)

        window = int(bt["rolling_window"])
        specs = [RatioSpec.parse(r) for r in bt["rolling_ratios"]]
        periods = len(primary.dates) - 1
        if periods >= window:
            rolling = rolling_leg_ratios(primary, specs, window)
            rolling["date"] = pd.DatetimeIndex(rolling["date"]).strftime("%Y-%m-%d")
        else:
            log.log("backtest", f"{periods} periods < rolling window {window}: no rolling ratios", 'WARNING')
            rolling = pd.DataFrame(columns=["date", "series", "ratio_kind", "level_beta", "level_gamma", "value"])
        self.writer.write_csv("rolling_ratios.csv", rolling)
        self._forward_ratios(primary, specs, window)

        best = table[table["best"]]
        log.log_table("Best scheme per rule (momentum terminal wealth)",
                      best[["rule", "scheme", "terminal_wealth"]].reset_index(drop=True))

    def _forward_ratios(self, result, specs, window):
        """Forward-looking ratios of the momentum leg from an ARMA-GARCH-NIG filter"""
        bt, fr = self.cfg["backtest"], self.cfg["frontier"]
        x = result.leg_returns["momentum"]
        columns = ["date", "series", "ratio", "value"]
        if x.size < max(100, window):
            log.log("backtest", "momentum leg too short for forward-looking ratios", 'WARNING')
            self.writer.write_csv("forward_ratios.csv", pd.DataFrame(columns=columns))
            return
        fit = arma_garch_fit(x, max_iter=int(fr["qmle_max_iter"]), max_restarts=int(fr["qmle_max_restarts"]))
        try:
            nig = nig_fit_moments(arma_garch_filter(x, fit.params).standardized)
        except NumericError as e:
            log.log("backtest", f"{e.message}; normal innovations used", 'WARNING')
            nig = None
        dates = result.dates[1:]
        frames = []
        for spec in specs:
            s = forward_ratio_series(x, spec, fit.params, nig, window, int(bt["forward_scenarios"]),
                                     self.cfg.seed, stride=int(bt["forward_stride"]), dates=dates)
            frames.append(pd.DataFrame({"date": pd.DatetimeIndex(s.index).strftime("%Y-%m-%d"),
                                        "series": "momentum", "ratio": spec.label, "value": s.to_numpy()}))
        self.writer.write_csv("forward_ratios.csv", pd.concat(frames, ignore_index=True)[columns])

    def stage_regimes(self):
        rg = self.cfg["regimes"]
        source = rg["source"]
        entries = {}
        if source == "bundled":
            for leg, tm in load_bundled_transitions().items():
                entries[leg] = {"p": tm.to_list()}
        elif source == "labels":
            path = self.cfg["inputs"].get("regime_labels") or self.writer.path("regimes.csv")
            labels = load_regime_labels(path)
            tm = estimate_transitions(labels, smoothing=bool(rg["smoothing"]))
            log.log("regimes", f"Estimated from {len(labels)} labels in {path}", 'SUCCESS')
            for leg in DP_LEGS:
                entries[leg] = {"p": tm.to_list(), "observations": len(labels)}
        else:
            frame = self.leg_returns()
            dates = pd.DatetimeIndex(frame["date"])
            for leg in DP_LEGS:
                fit = hmm_fit(frame[leg].to_numpy(), max_iter=int(rg["hmm_max_iter"]), tol=float(rg["hmm_tol"]),
                              variance_floor=float(rg["hmm_variance_floor"]), dates=dates)
                write_regime_labels(fit.viterbi, self.writer.path(f"hmm_{leg}_states.csv"))
                self.writer.record(f"hmm_{leg}_states.csv")
                entries[leg] = {"p": fit.transitions.to_list(), "hmm": fit.summary()}

        for leg, entry in entries.items():
            tm = TransitionMatrix(np.asarray(entry["p"], dtype=float))
            pi, unique = stationary_distribution(tm)
            if not unique:
                log.log("regimes", f"{leg}: both states absorbing, stationary law not unique", 'WARNING')
            entry.update({"source": source, "stationary": pi.tolist(), "stationary_unique": unique,
                          "sojourn_means": list(tm.sojourn_means())})
            log.log("regimes", f"{leg}: p00={tm.p[0, 0]:.4f} p11={tm.p[1, 1]:.4f} pi1={pi[1]:.4f}")
        self.writer.write_json("transitions.json", entries)
        if rg["figarch_fit"]:
            self._figarch_fits()

    def _figarch_series(self):
        """Leg returns long enough for the FIGARCH QMLE, else None"""
        if not self.writer.exists("leg_returns.csv"):
            log.log("regimes", "no leg_returns.csv: FIGARCH fits skipped", 'WARNING')
            return None
        frame = self.leg_returns()
        if len(frame) < cfg.FIGARCH_MIN_OBS:
            log.log("regimes", f"{len(frame)} leg returns < {cfg.FIGARCH_MIN_OBS}: FIGARCH fits skipped", 'WARNING')
            return None
        return frame

    def _figarch_fits(self):
        """figarch_fits.csv: per leg the published row, its weight-valid form and the QMLE fit"""
        rg, fr = self.cfg["regimes"], self.cfg["frontier"]
        bundled = load_bundled_parameters()
        frame = self._figarch_series()
        rows = []
        for leg in DP_LEGS:
            rows.append({"leg": leg, "source": "table", **bundled[leg]["table"]})
            rows.append({"leg": leg, "source": "weight_valid", **bundled[leg]["model"].to_dict()})
            if frame is None:
                continue
            x = frame[leg].to_numpy()
            try:
                fit = arfima_figarch_fit(x, figarch_start(x, int(rg["figarch_truncation"])),
                                         max_iter=int(fr["qmle_max_iter"]), max_restarts=int(fr["qmle_max_restarts"]))
            except NumericError as e:
                log.log("regimes", f"{leg}: FIGARCH fit failed ({e.message})", 'WARNING')
                continue
            rows.append({"leg": leg, "source": "fit", **fit.params.to_dict(), "loglik": fit.loglik,
                         "aic": fit.aic, "bic": fit.bic, "n_obs": fit.n_obs, "converged": fit.converged})
            log.log("regimes", f"{leg}: d_vol={fit.params.d_vol:.4f} d_mean={fit.params.d_mean:.4f} "
                               f"loglik={fit.loglik:.2f}", 'SUCCESS')
        self.writer.write_csv("figarch_fits.csv", pd.DataFrame(rows).reindex(columns=FIGARCH_COLUMNS))

    def stage_dp(self):
        dp = self.cfg["dp"]
        matrices = self.transitions()
        utility = UtilitySpec(float(dp["gamma"]), float(dp["risk_free"]))
        quad = gauss_hermite_rule(int(dp["quad_nodes"]))
        for leg in dp["legs"]:
            if leg not in matrices:
                raise DataError(f"transitions.json has no matrix for {leg!r}")
            state, pricing = self.leg_parameters(leg)
            model = DPModel(state, pricing, matrices[leg], utility)
            grid = default_grid(state, int(dp["grid_nodes"]), float(dp["grid_span"]))
            solution = solve_bellman(model, grid, int(dp["horizon"]), quad, pi_search=int(dp["pi_search"]),
                                     golden_tol=float(dp["golden_tol"]),
                                     extrapolation_warn=float(dp["extrapolation_warn"]))
            csv_name, meta_name = f"dp_{leg}_surfaces.csv", f"dp_{leg}_meta.json"
            write_surfaces(solution, self.writer.path(csv_name), self.writer.path(meta_name))
            self.writer.record(csv_name)
            self.writer.record(meta_name)
            pi0 = solution.policy.pi_star[0]
            log.log("dp", f"{leg}: pi* at t=0 in [{pi0.min():.4f}, {pi0.max():.4f}], "
                          f"extrapolation mass {solution.extrapolation_mass:.2e}", 'SUCCESS')

    def stage_simulate(self):
        sim, dp = self.cfg["simulate"], self.cfg["dp"]
        summaries, benchmarks, report = [], [], {}
        for leg in dp["legs"]:
            solution = read_surfaces(self.writer.path(f"dp_{leg}_surfaces.csv"),
                                     self.writer.path(f"dp_{leg}_meta.json"))
            h0 = solution.model.state.reference_variance
            args = dict(w0=float(sim["initial_wealth"]), h0=h0, d0=int(sim["initial_regime"]),
                        n_paths=int(sim["paths"]), seed=self.cfg.seed, block_size=int(sim["block_size"]),
                        workers=self.cfg.workers)
            ensemble = simulate_wealth(solution, **args)
            frame = wealth_summary(ensemble)
            frame.insert(0, "leg", leg)
            summaries.append(frame)
            bench = policy_vs_constant_benchmarks(solution, [float(c) for c in sim["constant_arms"]], **args)
            bench.insert(0, "leg", leg)
            benchmarks.append(bench)
            terminal = ensemble.terminal_log_wealth
            report[leg] = {
                "median_terminal_log_wealth": float(np.median(terminal)),
                "mean_terminal_log_wealth": float(np.mean(terminal)),
                "policy_dominated": bool(bench["policy_dominated"].any()),
            }
            if report[leg]["policy_dominated"]:
                log.log("simulate", f"{leg}: solved policy dominated by a constant arm", 'WARNING')

        self.writer.write_csv("wealth_summary.csv", pd.concat(summaries, ignore_index=True))
        self.writer.write_csv("policy_benchmarks.csv", pd.concat(benchmarks, ignore_index=True))
        outperforms = None
        if all(leg in report for leg in DP_LEGS):
            median = {leg: report[leg]["median_terminal_log_wealth"] for leg in DP_LEGS}
            outperforms = bool(median["momentum"] > max(median["winners"], median["losers"]))
            log.log_status(f"Momentum median terminal log-wealth exceeds both legs: {outperforms}",
                           'SUCCESS' if outperforms else 'WARNING')
        self.writer.write_json("simulate_summary.json", {"legs": report, "momentum_outperforms": outperforms,
                                                         "paths": int(sim["paths"])})

    def stage_frontier(self):
        fr = self.cfg["frontier"]
        panel = self.returns_panel()
        scenarios, fits = scenarios_from_history(panel, int(fr["scenarios"]), self.cfg.seed,
                                                 max_assets=int(fr["max_assets"]),
                                                 reference_draws=int(fr["nig_reference_draws"]),
                                                 max_iter=int(fr["qmle_max_iter"]),
                                                 max_restarts=int(fr["qmle_max_restarts"]))
        self.writer.write_csv("scenario_fits.csv", fits)
        risk_free = float(fr["risk_free"])
        summary = {}

        mv = mv_frontier(scenarios, int(fr["points"]), risk_free, float(fr["ridge"]), int(fr["pg_max_iter"]),
                         float(fr["pg_tol"]))
        self.writer.write_csv("frontier_mv.csv", mv.to_frame())
        risks = np.linspace(0.0, max(p.risk for p in mv.points), int(fr["points"]))
        cml = pd.DataFrame({"risk": risks, "expected_return": capital_market_line(mv, risks)})
        self.writer.write_csv("cml.csv", cml)
        summary["std"] = {"tangency_sharpe": mv.sharpe, "flags": mv.flags}

        for level in fr["cvar_levels"]:
            curve = cvar_frontier(scenarios, float(level), int(fr["points"]), risk_free, max_workers=self.cfg.workers)
            self.writer.write_csv(f"frontier_cvar_{_level_tag(level)}.csv", curve.to_frame())
            t = curve.tangency
            summary[curve.measure] = {"tangency_ratio": None if t is None or t.risk <= 0
                                      else (t.expected_return - risk_free) / t.risk,
                                      "min_risk": curve.points[0].risk, "flags": curve.flags}
        self.writer.write_json("frontier_summary.json", summary)
        log.log("frontier", f"{scenarios.n_scenarios} scenarios x {scenarios.n_assets} assets; "
                            f"tangency Sharpe {mv.sharpe:.4f}", 'SUCCESS')


def run_pipeline(run_config: RunConfig, stages=STAGES):
    """Run the stages and return the output directory"""
    return Pipeline(run_config).run(stages)
