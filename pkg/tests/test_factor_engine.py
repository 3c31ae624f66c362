import numpy as np
import pytest

from src.exceptions import ConfigError, DataError
from src.factor_engine import (FactorModel, explained_variance, fit_pca, forecast_portfolio_return, project_scores,
                               scores_to_panel)

from tests.conftest import make_panel


def one_factor_panel(rng, n=20, t=5000, share=0.88, factor_sd=0.01):
    """Unit loadings on one common factor; noise sized so the factor carries `share` of variance"""
    noise_var = n * factor_sd ** 2 * (1.0 - share) / (n * share - 1.0)
    factor = rng.normal(0.0, factor_sd, size=t)
    noise = rng.normal(0.0, np.sqrt(noise_var), size=(n, t))
    return make_panel(0.0003 + factor[None, :] + noise)


def test_first_component_share(rng):
    model = fit_pca(one_factor_panel(rng), k=5)
    table = explained_variance(model)
    assert table.loc[0, "share"] == pytest.approx(0.88, abs=0.02)
    assert table["cumulative"].is_monotonic_increasing
    assert list(table.columns) == ["component", "eigenvalue", "share", "cumulative"]


def test_full_rank_reconstruction(rng, random_panel):
    model = fit_pca(random_panel, k=random_panel.n_assets)
    scores = project_scores(model, random_panel)
    rebuilt = model.reconstruct(scores.scores)
    assert np.max(np.abs(rebuilt - random_panel.returns)) < 1e-8


def test_correlation_reconstruction(random_panel):
    model = fit_pca(random_panel, k=random_panel.n_assets, correlation=True)
    rebuilt = model.reconstruct(project_scores(model, random_panel).scores)
    assert np.max(np.abs(rebuilt - random_panel.returns)) < 1e-8


def test_score_variances_equal_eigenvalues(random_panel):
    model = fit_pca(random_panel, k=4)
    scores = project_scores(model, random_panel).scores
    np.testing.assert_allclose(scores.var(axis=0, ddof=1), model.eigenvalues, rtol=1e-8)


def test_loadings_orthonormal_and_signed(random_panel):
    model = fit_pca(random_panel, k=6)
    np.testing.assert_allclose(model.loadings.T @ model.loadings, np.eye(6), atol=1e-10)
    pivots = np.argmax(np.abs(model.loadings), axis=0)
    assert np.all(model.loadings[pivots, np.arange(6)] > 0)
    assert np.all(np.diff(model.eigenvalues) <= 0)


def test_normalized_scores(random_panel):
    model = fit_pca(random_panel, k=3)
    scores = project_scores(model, random_panel, normalize=True)
    assert scores.normalized
    np.testing.assert_allclose(scores.scores.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(scores.scores.std(axis=0, ddof=1), 1.0, rtol=1e-10)


@pytest.mark.parametrize("k", [0, 11])
def test_component_count_bounds(random_panel, k):
    with pytest.raises(ConfigError):
        fit_pca(random_panel, k=k)


def test_project_rejects_other_universe(random_panel, rng):
    model = fit_pca(random_panel, k=2)
    other = make_panel(rng.normal(0, 0.01, size=(10, 50)), prefix="B")
    with pytest.raises(DataError):
        project_scores(model, other)


def test_model_json_round_trip(random_panel):
    model = fit_pca(random_panel, k=3)
    loaded = FactorModel.from_json(model.to_json())
    np.testing.assert_allclose(loaded.loadings, model.loadings)
    assert loaded.asset_ids == model.asset_ids
    assert loaded.total_variance == pytest.approx(model.total_variance)


def test_forecast_is_inner_product():
    f = np.array([[1.0, 2.0], [0.5, -1.0]])
    np.testing.assert_allclose(forecast_portfolio_return(f, [0.5, 0.25]), [1.0, 0.0])
    with pytest.raises(DataError):
        forecast_portfolio_return(f, [1.0, 0.0, 0.0])


def test_scores_to_panel_ids(random_panel):
    model = fit_pca(random_panel, k=3)
    panel = scores_to_panel(project_scores(model, random_panel))
    assert panel.asset_ids == ["F01", "F02", "F03"]
    assert panel.n_dates == random_panel.n_dates
