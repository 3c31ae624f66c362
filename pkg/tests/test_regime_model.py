import numpy as np
import pandas as pd
import pytest

from src.exceptions import ConfigError, DataError
from src.regime_model import (RegimePath, RegimePricing, TransitionMatrix, bundled_state, estimate_transitions,
                              hmm_fit, load_bundled_parameters, load_bundled_transitions, load_regime_labels,
                              price_of_risk, simulate_chain, stationary_distribution, transition_counts,
                              write_regime_labels)
from src.seeding import substream
from src.vol_models import figarch_arch_weights


def test_bundled_matrices():
    bundled = load_bundled_transitions()
    assert set(bundled) == {"winners", "losers", "momentum"}
    np.testing.assert_allclose(bundled["momentum"].p, [[0.87, 0.13], [0.19, 0.81]])
    for tm in bundled.values():
        np.testing.assert_allclose(tm.p.sum(axis=1), 1.0)


def test_bundled_parameters():
    params = load_bundled_parameters()
    momentum = params["momentum"]
    assert momentum["model"].omega == pytest.approx(9.36e-6)
    assert momentum["pricing"].lambda0 == pytest.approx(0.3735)
    assert params["losers"]["model"].d_vol == 1.0


def test_bundled_models_have_nonnegative_weights():
    params = load_bundled_parameters()
    for leg, entry in params.items():
        assert np.all(figarch_arch_weights(entry["model"])[1:] >= -1e-12), leg
        assert entry["model"].alpha <= entry["table"]["alpha"]
    momentum = params["momentum"]
    assert momentum["mapped"]
    assert momentum["model"].alpha < 0.8338
    assert momentum["model"].beta == pytest.approx(0.4587)
    assert momentum["model"].d_vol == pytest.approx(0.5281)
    assert params["losers"]["model"].alpha == 0.0


def test_bundled_state_keeps_published_values():
    state = bundled_state(load_bundled_parameters()["momentum"], leverage=0.1)
    assert state.omega == pytest.approx(9.36e-6)
    assert state.alpha == pytest.approx(0.8338)
    assert state.beta == pytest.approx(0.4587)
    assert state.leverage == 0.1


def test_momentum_sojourns_and_occupancy():
    tm = load_bundled_transitions()["momentum"]
    stay0, stay1 = tm.sojourn_means()
    assert stay0 == pytest.approx(7.69, abs=0.01)
    assert stay1 == pytest.approx(5.26, abs=0.01)
    pi, unique = stationary_distribution(tm)
    assert unique
    np.testing.assert_allclose(pi, [0.59375, 0.40625])
    np.testing.assert_allclose(pi @ tm.p, pi)


def test_absorbing_chain_has_no_unique_stationary_law():
    pi, unique = stationary_distribution(TransitionMatrix(np.eye(2)))
    assert not unique
    np.testing.assert_allclose(pi, [0.5, 0.5])
    assert TransitionMatrix(np.eye(2)).sojourn_means() == (float("inf"), float("inf"))


@pytest.mark.parametrize("p", [[[0.5, 0.6], [0.5, 0.5]], [[1.2, -0.2], [0.5, 0.5]], [[1.0]]])
def test_invalid_transition_matrix(p):
    with pytest.raises(ConfigError):
        TransitionMatrix(np.array(p))


def test_transition_counts():
    path = RegimePath(np.array([0, 0, 1, 1, 0, 1]))
    np.testing.assert_array_equal(transition_counts(path), [[1, 2], [1, 1]])
    tm = estimate_transitions(path)
    np.testing.assert_allclose(tm.p, [[1 / 3, 2 / 3], [0.5, 0.5]])


def test_estimate_needs_both_source_states():
    path = RegimePath(np.array([0, 0, 0, 1]))
    with pytest.raises(DataError, match="smoothing"):
        estimate_transitions(path)
    smoothed = estimate_transitions(path, smoothing=True)
    np.testing.assert_allclose(smoothed.p[1], [0.5, 0.5])


def test_regime_path_validation():
    with pytest.raises(DataError):
        RegimePath(np.array([0, 2, 1]))
    with pytest.raises(DataError):
        RegimePath(np.array([0, 1]), pd.bdate_range("2020-01-01", periods=3))


@pytest.mark.slow
@pytest.mark.parametrize("leg", ["winners", "losers", "momentum"])
def test_long_chain_recovers_matrix(leg):
    tm = load_bundled_transitions()[leg]
    path = simulate_chain(tm, 0, 100_000, seed=2024)
    np.testing.assert_allclose(estimate_transitions(path).p, tm.p, atol=0.01)


def test_chain_is_reproducible():
    tm = TransitionMatrix.from_persistence(0.9, 0.8)
    first = simulate_chain(tm, 1, 500, seed=4)
    again = simulate_chain(tm, 1, 500, seed=4)
    np.testing.assert_array_equal(first.states, again.states)
    assert first.states[0] == 1


def test_price_of_risk():
    pricing = RegimePricing(0.3735, -0.5354)
    assert price_of_risk(pricing, 0) == pytest.approx(0.3735)
    assert price_of_risk(pricing, 1) == pytest.approx(0.3735 - 0.5354)
    with pytest.raises(ConfigError):
        price_of_risk(pricing, 2)


@pytest.mark.slow
def test_hmm_recovers_separated_states():
    truth = TransitionMatrix(np.array([[0.95, 0.05], [0.10, 0.90]]))
    path = simulate_chain(truth, 0, 3000, seed=17)
    noise = substream(17, "hmm_test_noise").standard_normal(3000)
    means = np.array([-0.02, 0.02])
    x = means[path.states] + 0.006 * noise

    fit = hmm_fit(x, max_iter=300)
    assert fit.identifiable
    np.testing.assert_allclose(fit.transitions.p, truth.p, atol=0.05)
    np.testing.assert_allclose(fit.emissions.means, means, atol=0.002)
    accuracy = np.mean(fit.viterbi.states == path.states)
    assert accuracy >= 0.95
    history = np.array(fit.loglik_history)
    assert np.all(np.diff(history) >= -1e-6)
    np.testing.assert_allclose(fit.smoothed.sum(axis=1), 1.0)
    assert set(fit.summary()) >= {"transition", "emissions", "loglik", "converged"}


def test_hmm_needs_history():
    with pytest.raises(DataError, match="at least 100"):
        hmm_fit(np.zeros(50))


def test_regime_labels_file(tmp_path):
    dates = pd.bdate_range("2021-03-01", periods=4)
    path = RegimePath(np.array([0, 1, 1, 0]), dates)
    target = tmp_path / "regimes.csv"
    write_regime_labels(path, target)
    loaded = load_regime_labels(str(target))
    np.testing.assert_array_equal(loaded.states, path.states)
    assert list(loaded.dates) == list(dates)


def test_regime_labels_missing_file(tmp_path):
    with pytest.raises(DataError, match="File not found"):
        load_regime_labels(str(tmp_path / "absent.csv"))
