import numpy as np
import pytest

from src.data_model import load_price_csv, load_return_csv
from src.exceptions import ConfigError
from src.regime_model import RegimePricing, TransitionMatrix, load_regime_labels
from src.synthetic import SyntheticSpec, generate_synthetic, write_synthetic
from src.vol_models import GjrStateParams

FLAT_STATE = GjrStateParams(omega=1e-6, beta=0.9, alpha=0.0, leverage=0.0)


def flat_spec(n_assets, horizon, pricing=RegimePricing(0.0, 0.0), **kwargs):
    return SyntheticSpec(n_assets, horizon, FLAT_STATE, pricing, TransitionMatrix.from_persistence(0.9, 0.8),
                         **kwargs)


def test_premium_shifts_mean_by_lambda_h():
    base = SyntheticSpec.from_bundled("momentum", n_assets=6, horizon=800)
    zero = SyntheticSpec(base.n_assets, base.horizon, base.state, RegimePricing(0.0, 0.0), base.transition)
    priced = generate_synthetic(base, seed=31)
    flat = generate_synthetic(zero, seed=31)
    np.testing.assert_array_equal(priced.variances, flat.variances)
    np.testing.assert_array_equal(priced.regimes.states, flat.regimes.states)
    lam = np.array([base.pricing.lambda0, base.pricing.lambda0 + base.pricing.lambda1])[priced.regimes.states]
    np.testing.assert_allclose(priced.returns.returns - flat.returns.returns, lam[None, :] * priced.variances,
                               rtol=0, atol=1e-12)


def test_zero_premium_has_zero_mean():
    data = generate_synthetic(flat_spec(10, 2000, factor_share=0.0), seed=31)
    standardized = data.returns.returns / np.sqrt(data.variances)
    assert abs(standardized.mean()) < 0.03


@pytest.mark.slow
def test_regime_occupancy_matches_stationary_law():
    spec = SyntheticSpec.from_bundled("momentum", n_assets=1, horizon=50_000)
    data = generate_synthetic(spec, seed=8)
    assert data.regimes.states.mean() == pytest.approx(0.40625, abs=0.02)


def test_shapes_dates_and_ids():
    data = generate_synthetic(SyntheticSpec.from_bundled("winners", n_assets=4, horizon=250), seed=1)
    assert data.prices.n_dates == 251
    assert data.returns.n_dates == 250
    assert list(data.returns.asset_ids) == ["S01", "S02", "S03", "S04"]
    assert list(data.regimes.dates) == list(data.returns.dates)
    np.testing.assert_array_equal(data.prices.prices[:, 0], 100.0)
    assert data.variances.shape == (4, 250)


def test_variances_clamped_to_span():
    spec = SyntheticSpec.from_bundled("momentum", n_assets=5, horizon=500, span=10.0)
    data = generate_synthetic(spec, seed=2)
    h_ref = spec.state.reference_variance
    assert data.variances.min() >= h_ref / 10.0 * (1 - 1e-12)
    assert data.variances.max() <= h_ref * 10.0 * (1 + 1e-12)


def test_same_seed_same_panel():
    spec = SyntheticSpec.from_bundled("losers", n_assets=3, horizon=300, leverage=0.05)
    first = generate_synthetic(spec, seed=77)
    again = generate_synthetic(spec, seed=77)
    np.testing.assert_array_equal(first.returns.returns, again.returns.returns)
    other = generate_synthetic(spec, seed=78)
    assert not np.array_equal(first.returns.returns, other.returns.returns)


def test_common_factor_correlates_assets():
    data = generate_synthetic(flat_spec(2, 4000, factor_share=0.8), seed=4)
    corr = np.corrcoef(data.returns.returns)[0, 1]
    assert corr == pytest.approx(0.8, abs=0.03)


def test_invalid_specs():
    with pytest.raises(ConfigError):
        SyntheticSpec.from_bundled("benchmark")
    with pytest.raises(ConfigError):
        SyntheticSpec.from_bundled("momentum", factor_share=1.5)
    with pytest.raises(ConfigError):
        SyntheticSpec.from_bundled("momentum", horizon=1)
    with pytest.raises(ConfigError):
        flat_spec(2, 10, d0=2)


def test_write_synthetic_files(tmp_path):
    data = generate_synthetic(SyntheticSpec.from_bundled("momentum", n_assets=3, horizon=120), seed=5)
    paths = write_synthetic(data, str(tmp_path / "syn"))
    prices = load_price_csv(paths["prices"])
    returns = load_return_csv(paths["returns"])
    regimes = load_regime_labels(paths["regimes"])
    assert prices.n_dates == 121
    np.testing.assert_allclose(returns.returns, data.returns.returns, rtol=1e-9, atol=1e-15)
    np.testing.assert_array_equal(regimes.states, data.regimes.states)
