import json

import numpy as np
import pandas as pd
import pytest

from src.data_model import ReturnPanel
from src.logger_utils import ColoredLogger


@pytest.fixture(autouse=True)
def quiet_logs():
    ColoredLogger.set_quiet(True)
    yield
    ColoredLogger.set_quiet(False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_panel(values, start="2020-01-01", prefix="A"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    dates = pd.bdate_range(start, periods=values.shape[1])
    ids = [f"{prefix}{i + 1:02d}" for i in range(values.shape[0])]
    return ReturnPanel(dates, values, ids)


@pytest.fixture
def random_panel(rng):
    return make_panel(rng.normal(0.0005, 0.01, size=(10, 120)))


def write_price_csv(path, frame):
    frame.to_csv(path, index=False)
    return str(path)


SMALL_RUN = {
    "schema_version": 1,
    "seed": 2024,
    "workers": 1,
    "pca": {"components": 3, "universe": "assets"},
    "backtest": {"schemes_weeks": [[1, 1], [2, 1]], "ratios": ["Sharpe", "STARR(0.95)"], "rolling_window": 50,
                 "rolling_ratios": ["Sharpe"], "forward_scenarios": 200, "forward_stride": 50},
    "regimes": {"source": "labels"},
    "dp": {"horizon": 10, "grid_nodes": 16, "pi_search": 11, "quad_nodes": 21},
    "simulate": {"paths": 200, "block_size": 100},
    "frontier": {"scenarios": 200, "points": 5, "cvar_levels": [0.95], "max_assets": 3,
                 "nig_reference_draws": 2000, "qmle_max_iter": 300, "qmle_max_restarts": 1},
    "synthetic": {"assets": 6, "horizon": 300, "factor_share": 0.3, "leg": "momentum"},
}


def write_run_config(directory, out_dir, **blocks):
    """Small synthetic run written as JSON; keyword blocks replace SMALL_RUN blocks"""
    document = {**SMALL_RUN, "output_dir": str(out_dir), **blocks}
    path = directory / "run.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)
