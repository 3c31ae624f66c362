"""
Report tables from pipeline artifacts: moments, final wealth with the best-scheme
marker, rolling ratios, simulated wealth, frontiers and, when present, the FIGARCH
fits next to the bundled parameters (CSV copies + report.xlsx)
"""
import glob
import os

import pandas as pd

from src.data_model import SUMMARY_COLUMNS
from src.exceptions import DataError
from src.logger_utils import ColoredLogger as log
from src.report_writer import ArtifactWriter
from src.stage_monitor import StageMonitor

BEST_MARKER = "†"
REQUIRED = ("scheme_table.csv", "final_wealth.csv", "rolling_ratios.csv", "wealth_summary.csv",
            "frontier_mv.csv")
OPTIONAL = {"figarch_fits.csv": ("table_figarch.csv", "FIGARCH")}

TABLE_HEADERS = {
    "table_moments.csv": ["scheme", "rule", "leg"] + SUMMARY_COLUMNS,
    "table_final_wealth.csv": ["scheme", "rule", "leg", "terminal_wealth", "realized_profit", "marker"],
    "table_rolling.csv": ["date", "series", "ratio_kind", "level_beta", "level_gamma", "value"],
    "table_wealth.csv": ["leg", "t", "mean", "q05", "q25", "q50", "q75", "q95"],
    "table_frontiers.csv": ["measure", "kind", "risk", "expected_return"],
    "table_figarch.csv": ["leg", "source", "mu", "ar", "ma", "d_mean", "omega", "alpha", "beta", "d_vol", "loglik",
                          "aic", "bic", "n_obs", "converged"],
}


def mark_best(final: pd.DataFrame) -> pd.DataFrame:
    """Marker column: † on the momentum row with the highest terminal wealth per rule"""
    out = final.copy()
    out["marker"] = ""
    spread = out[out["leg"] == "momentum"]
    for _, group in spread.groupby("rule", sort=False):
        out.loc[group["terminal_wealth"].idxmax(), "marker"] = BEST_MARKER
    return out


def _frontier_files(writer):
    names = sorted(os.path.basename(p) for p in glob.glob(writer.path("frontier_cvar_*.csv")))
    return ["frontier_mv.csv"] + names


def build_report(out_dir):
    """
    Build report tables from the artifacts in out_dir.

    Returns:
        {table file name: DataFrame}
    """
    writer = ArtifactWriter(out_dir)
    missing = [name for name in REQUIRED if not writer.exists(name)]
    if missing:
        raise DataError(f"missing artifacts in {out_dir}: {', '.join(missing)}; run the pipeline first")

    scheme = writer.read_csv("scheme_table.csv")
    final = mark_best(writer.read_csv("final_wealth.csv"))
    rolling = writer.read_csv("rolling_ratios.csv")
    wealth = writer.read_csv("wealth_summary.csv")
    frontiers = pd.concat([writer.read_csv(name) for name in _frontier_files(writer)], ignore_index=True)

    tables = {
        "table_moments.csv": scheme[TABLE_HEADERS["table_moments.csv"]],
        "table_final_wealth.csv": final[TABLE_HEADERS["table_final_wealth.csv"]],
        "table_rolling.csv": rolling[TABLE_HEADERS["table_rolling.csv"]],
        "table_wealth.csv": wealth,
        "table_frontiers.csv": frontiers,
    }
    sheets = {
        "Moments": tables["table_moments.csv"],
        "FinalWealth": tables["table_final_wealth.csv"],
        "Rolling": tables["table_rolling.csv"],
        "Wealth": tables["table_wealth.csv"],
        "Frontiers": tables["table_frontiers.csv"],
    }
    for source, (name, sheet) in OPTIONAL.items():
        if writer.exists(source):
            tables[name] = writer.read_csv(source).reindex(columns=TABLE_HEADERS[name])
            sheets[sheet] = tables[name]
        else:
            log.log("report", f"{source} not found: {sheet} table skipped", 'WARNING')
    for name, frame in tables.items():
        writer.write_csv(name, frame)
    writer.write_sheets(sheets)
    StageMonitor(out_dir).mark_report(writer.take_written())
    best = final[final["marker"] == BEST_MARKER]
    log.log_table("Final wealth (best scheme per rule)", best[["rule", "scheme", "terminal_wealth"]])
    return tables
