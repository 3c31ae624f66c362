import numpy as np
import pandas as pd
import pytest

from src.data_model import (CsvSchema, MissingPolicy, PricePanel, ReturnPanel, compound_prices,
                            equal_weight_benchmark, load_price_csv, load_return_csv, summary_stats, summary_table,
                            to_arithmetic_returns, write_panel_csv)
from src.exceptions import ConfigError, DataError, ZeroVarianceError

from tests.conftest import make_panel


def price_frame():
    return pd.DataFrame({
        "date": ["2021-01-04", "2021-01-05", "2021-01-06", "2021-01-07"],
        "AAA": [100.0, 101.0, 99.99, 102.0],
        "BBB": [50.0, 50.5, 51.0, 50.0],
    })


def test_arithmetic_returns_dated_at_later_price():
    dates = pd.bdate_range("2021-01-04", periods=3)
    prices = PricePanel(dates, np.array([[100.0, 110.0, 99.0]]), ["X"])
    returns = to_arithmetic_returns(prices)
    np.testing.assert_allclose(returns.returns[0], [0.1, -0.1])
    assert list(returns.dates) == list(dates[1:])


def test_compound_prices_inverts_returns(rng):
    r = rng.normal(0, 0.01, size=(3, 50))
    prices = compound_prices(r, [10.0, 20.0, 30.0])
    panel = PricePanel(pd.bdate_range("2020-01-01", periods=51), prices, ["a", "b", "c"])
    np.testing.assert_allclose(to_arithmetic_returns(panel).returns, r, rtol=1e-12, atol=1e-14)


def test_load_price_csv_sorts_and_parses(tmp_path):
    frame = price_frame().iloc[::-1]
    path = tmp_path / "prices.csv"
    frame.to_csv(path, index=False)
    panel = load_price_csv(str(path))
    assert panel.asset_ids == ["AAA", "BBB"]
    assert panel.dates.is_monotonic_increasing
    assert panel.prices[0, 0] == 100.0


def test_load_price_csv_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.csv"
    with pytest.raises(DataError, match="nope.csv"):
        load_price_csv(str(missing))


def test_duplicate_date_rejected(tmp_path):
    frame = price_frame()
    frame.loc[2, "date"] = "2021-01-05"
    path = tmp_path / "dup.csv"
    frame.to_csv(path, index=False)
    with pytest.raises(DataError, match="duplicate date"):
        load_price_csv(str(path))


def test_non_positive_price_rejected(tmp_path):
    frame = price_frame()
    frame.loc[1, "AAA"] = 0.0
    path = tmp_path / "zero.csv"
    frame.to_csv(path, index=False)
    with pytest.raises(DataError, match="non-positive"):
        load_price_csv(str(path))


@pytest.mark.parametrize("policy, rows", [("drop-row", 3), ("forward-fill", 4)])
def test_missing_policy(tmp_path, policy, rows):
    frame = price_frame()
    frame["AAA"] = frame["AAA"].astype(object)
    frame.loc[2, "AAA"] = ""
    path = tmp_path / "gap.csv"
    frame.to_csv(path, index=False)
    panel = load_price_csv(str(path), CsvSchema(missing=MissingPolicy.parse(policy)))
    assert panel.n_dates == rows
    if policy == "forward-fill":
        assert panel.prices[0, 2] == 101.0


def test_unknown_missing_policy():
    with pytest.raises(ConfigError):
        MissingPolicy.parse("interpolate")


def test_write_and_load_return_csv(tmp_path, random_panel):
    path = tmp_path / "returns.csv"
    write_panel_csv(random_panel, str(path))
    loaded = load_return_csv(str(path))
    assert loaded.asset_ids == random_panel.asset_ids
    np.testing.assert_allclose(loaded.returns, random_panel.returns, rtol=1e-10)


def test_return_panel_rejects_total_loss():
    with pytest.raises(DataError):
        make_panel([[0.1, -1.0, 0.2]])


def test_panel_window_and_select(random_panel):
    sub = random_panel.window(10, 20).select(["A03", "A01"])
    assert sub.n_dates == 10
    assert sub.asset_ids == ["A03", "A01"]
    np.testing.assert_array_equal(sub.returns[1], random_panel.returns[0, 10:20])


def test_summary_stats_matches_definitions(rng):
    x = rng.standard_t(5, size=400) * 0.01
    stats = summary_stats(x)
    dev = x - x.mean()
    m2 = np.mean(dev ** 2)
    assert stats.mean == pytest.approx(x.mean())
    assert stats.std_dev == pytest.approx(x.std(ddof=1))
    assert stats.skewness == pytest.approx(np.mean(dev ** 3) / m2 ** 1.5)
    assert stats.kurtosis == pytest.approx(np.mean(dev ** 4) / m2 ** 2)


def test_summary_stats_constant_series():
    with pytest.raises(ZeroVarianceError):
        summary_stats(np.full(10, 0.01))


def test_summary_stats_too_short():
    with pytest.raises(DataError, match="at least 4"):
        summary_stats([0.1, 0.2, 0.3])


def test_summary_table_columns(random_panel):
    table = summary_table({"bench": equal_weight_benchmark(random_panel)})
    assert list(table.columns) == ["Mean", "Std. Dev.", "Skewness", "Kurtosis"]
    assert table.loc["bench", "Mean"] == pytest.approx(random_panel.returns.mean())


def test_return_panel_is_read_only(random_panel):
    with pytest.raises(ValueError):
        random_panel.returns[0, 0] = 1.0


def test_unsorted_dates_rejected():
    dates = pd.DatetimeIndex(["2021-01-05", "2021-01-04"])
    with pytest.raises(DataError, match="increasing"):
        PricePanel(dates, np.ones((1, 2)), ["X"])
    ReturnPanel(pd.DatetimeIndex(["2021-01-04", "2021-01-05"]), np.zeros((1, 2)), ["X"])
