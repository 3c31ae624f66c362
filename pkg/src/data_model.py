"""
Price/return panels: CSV ingestion, arithmetic returns and summary statistics
"""
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

import config as cfg
from src.exceptions import ConfigError, DataError, ZeroVarianceError
from src.logger_utils import ColoredLogger as log


class MissingPolicy(Enum):
    DROP_ROW = "drop-row"
    FORWARD_FILL = "forward-fill"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown missing-data policy: {value!r}")


@dataclass(frozen=True)
class CsvSchema:
    """
    Args:
        date_column: Name of the date column (None = first column)
        asset_columns: Subset of asset columns to keep (None = all others)
        missing: What to do with unparseable or empty cells
    """
    date_column: Optional[str] = None
    asset_columns: Optional[Sequence[str]] = None
    missing: MissingPolicy = MissingPolicy.DROP_ROW


def _check_ids(asset_ids):
    if len(set(asset_ids)) != len(asset_ids):
        raise DataError("asset ids must be unique")


@dataclass(frozen=True)
class PricePanel:
    dates: pd.DatetimeIndex
    prices: np.ndarray              # N x T
    asset_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2 or prices.shape[1] != len(self.dates) or prices.shape[0] != len(self.asset_ids):
            raise DataError("price matrix shape does not match dates/asset ids")
        if not self.dates.is_monotonic_increasing or self.dates.has_duplicates:
            raise DataError("dates must be strictly increasing")
        if not np.all(np.isfinite(prices)):
            raise DataError("missing price cells after alignment")
        if np.any(prices <= 0):
            raise DataError("non-positive price")
        _check_ids(self.asset_ids)
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    @property
    def n_assets(self):
        return self.prices.shape[0]

    @property
    def n_dates(self):
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnPanel:
    dates: pd.DatetimeIndex
    returns: np.ndarray             # N x T
    asset_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim == 1:
            returns = returns[None, :]
        if returns.ndim != 2 or returns.shape[1] != len(self.dates) or returns.shape[0] != len(self.asset_ids):
            raise DataError("return matrix shape does not match dates/asset ids")
        if np.any(np.isnan(returns)):
            raise DataError("NaN returns in panel")
        if np.any(returns <= -1.0):
            raise DataError("return at or below -100%")
        _check_ids(self.asset_ids)
        returns.setflags(write=False)
        object.__setattr__(self, "returns", returns)

    @property
    def n_assets(self):
        return self.returns.shape[0]

    @property
    def n_dates(self):
        return self.returns.shape[1]

    def window(self, start, stop):
        """Columns [start, stop) as a new panel"""
        return ReturnPanel(self.dates[start:stop], self.returns[:, start:stop], list(self.asset_ids))

    def select(self, asset_ids):
        index = {a: i for i, a in enumerate(self.asset_ids)}
        missing = [a for a in asset_ids if a not in index]
        if missing:
            raise DataError(f"unknown assets: {missing}")
        rows = [index[a] for a in asset_ids]
        return ReturnPanel(self.dates, self.returns[rows], list(asset_ids))

    def scaled(self, factor):
        return ReturnPanel(self.dates, self.returns * factor, list(self.asset_ids))

    def with_returns(self, returns):
        """Same dates and ids, new values"""
        return ReturnPanel(self.dates, returns, list(self.asset_ids))

    def series(self, asset_id):
        return self.returns[self.asset_ids.index(asset_id)]


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std_dev: float
    skewness: float
    kurtosis: float

    def as_row(self):
        return {"Mean": self.mean, "Std. Dev.": self.std_dev,
                "Skewness": self.skewness, "Kurtosis": self.kurtosis}


SUMMARY_COLUMNS = ["Mean", "Std. Dev.", "Skewness", "Kurtosis"]


# ------------------------------------------
# INGEST
# ------------------------------------------
def _read_frame(path):
    if not os.path.exists(path):
        raise DataError(f"File not found: {path}")
    if path.endswith('.csv'):
        return pd.read_csv(path)
    if path.endswith('.xlsx'):
        return pd.read_excel(path)
    raise DataError("Unsupported file format. Use .csv or .xlsx")


def _parse_table(path, schema, positive):
    frame = _read_frame(path)
    if frame.shape[1] < 2:
        raise DataError(f"{path}: need a date column and at least one asset column")
    date_column = schema.date_column or frame.columns[0]
    if date_column not in frame.columns:
        raise DataError(f"{path}: no date column {date_column!r}")
    asset_columns = (list(schema.asset_columns) if schema.asset_columns
                     else [c for c in frame.columns if c != date_column])
    absent = [c for c in asset_columns if c not in frame.columns]
    if absent:
        raise DataError(f"{path}: missing asset columns {absent}")

    try:
        dates = pd.to_datetime(frame[date_column].astype(str), format="ISO8601")
    except (ValueError, TypeError) as e:
        raise DataError(f"{path}: malformed date ({e})")
    if dates.duplicated().any():
        dup = dates[dates.duplicated()].iloc[0]
        raise DataError(f"{path}: duplicate date {dup.date()}")

    values = frame[asset_columns].apply(pd.to_numeric, errors="coerce")
    values.index = pd.DatetimeIndex(dates)
    values = values.sort_index()

    bad = values.isna().any(axis=1)
    if bad.any():
        if schema.missing is MissingPolicy.DROP_ROW:
            log.log("ingest", f"Dropping {int(bad.sum())} row(s) with missing cells", 'WARNING')
            values = values.loc[~bad]
        else:
            values = values.ffill()
            if values.isna().any().any():
                raise DataError(f"{path}: leading missing cells cannot be forward-filled")
            log.log("ingest", f"Forward-filled {int(bad.sum())} row(s)", 'WARNING')

    matrix = values.to_numpy(dtype=float, copy=True).T
    if positive and np.any(matrix <= 0):
        raise DataError(f"{path}: non-positive price")
    return pd.DatetimeIndex(values.index), matrix, [str(c) for c in asset_columns]


def load_price_csv(path, schema=None):
    """Load a date x asset price table; sorted by date, gaps handled per schema.missing"""
    schema = schema or CsvSchema()
    dates, matrix, ids = _parse_table(path, schema, positive=True)
    panel = PricePanel(dates, matrix, ids)
    log.log("ingest", f"Loaded {panel.n_assets} assets x {panel.n_dates} dates from {path}", 'SUCCESS')
    return panel


def load_return_csv(path, schema=None):
    schema = schema or CsvSchema()
    dates, matrix, ids = _parse_table(path, schema, positive=False)
    return ReturnPanel(dates, matrix, ids)


def to_arithmetic_returns(panel: PricePanel) -> ReturnPanel:
    """r_t = p_t / p_{t-1} - 1, dated at t"""
    if panel.n_dates < 2:
        raise DataError("need at least two price dates for returns")
    prices = panel.prices
    returns = prices[:, 1:] / prices[:, :-1] - 1.0
    return ReturnPanel(panel.dates[1:], returns, list(panel.asset_ids))


def compound_prices(returns, p0):
    """Inverse of to_arithmetic_returns: price path starting at p0"""
    returns = np.atleast_2d(np.asarray(returns, dtype=float))
    p0 = np.asarray(p0, dtype=float).reshape(-1, 1)
    return np.hstack([p0, p0 * np.cumprod(1.0 + returns, axis=1)])


def panel_to_frame(panel):
    values = panel.prices if isinstance(panel, PricePanel) else panel.returns
    frame = pd.DataFrame(values.T, index=panel.dates, columns=panel.asset_ids)
    frame.index.name = "date"
    return frame


def write_panel_csv(panel, path):
    frame = panel_to_frame(panel)
    frame.index = frame.index.strftime("%Y-%m-%d")
    frame.to_csv(path, float_format="%.12g")


def equal_weight_benchmark(panel: ReturnPanel):
    """Equally weighted universe return per period"""
    return panel.returns.mean(axis=0)


# ------------------------------------------
# SUMMARY STATISTICS
# ------------------------------------------
def is_degenerate_variance(var, mean):
    """True when var is zero up to rounding of values around mean"""
    return var <= (1e-12 * max(abs(mean), 1.0)) ** 2


def summary_stats(series) -> SummaryStats:
    """
    Mean, sample std (n-1), standardized third moment and raw (non-excess)
    fourth moment; the higher moments use the population scale.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < cfg.MIN_STATS_LENGTH:
        raise DataError(f"summary statistics need at least {cfg.MIN_STATS_LENGTH} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite values in series")
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev ** 2))
    if is_degenerate_variance(m2, mean):
        raise ZeroVarianceError("zero variance: skewness and kurtosis undefined")
    skew = float(np.mean(dev ** 3) / m2 ** 1.5)
    kurt = float(np.mean(dev ** 4) / m2 ** 2)
    return SummaryStats(mean, float(x.std(ddof=1)), skew, kurt)


def summary_table(series_by_name):
    """DataFrame in the Mean / Std. Dev. / Skewness / Kurtosis column order"""
    rows = {name: summary_stats(s).as_row() for name, s in series_by_name.items()}
    return pd.DataFrame.from_dict(rows, orient="index", columns=SUMMARY_COLUMNS)
