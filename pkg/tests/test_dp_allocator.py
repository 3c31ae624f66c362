import math

import numpy as np
import pytest

from src.dp_allocator import (ContinuationSlice, DPModel, StateGrid, UtilitySpec, certainty_equivalent,
                              default_grid, gauss_hermite_rule, policy_vs_constant_benchmarks, read_surfaces,
                              simulate_wealth, solve_bellman, wealth_summary, write_surfaces)
from src.exceptions import ConfigError
from src.regime_model import RegimePricing, TransitionMatrix, load_bundled_transitions
from src.vol_models import GjrStateParams

MOMENTUM_STATE = GjrStateParams(omega=9.36e-6, beta=0.4587, alpha=0.8338)
MOMENTUM_PRICING = RegimePricing(0.3735, -0.5354)


def momentum_model(gamma=-5.0, risk_free=0.0):
    return DPModel(MOMENTUM_STATE, MOMENTUM_PRICING, load_bundled_transitions()["momentum"],
                   UtilitySpec(gamma, risk_free))


def merton_model():
    state = GjrStateParams(omega=1e-6, beta=0.9, alpha=0.0, leverage=0.0)
    return DPModel(state, RegimePricing(0.37, 0.0), TransitionMatrix.from_persistence(0.9, 0.8),
                   UtilitySpec(-5.0, 0.0))


# ------------------------------------------
# BUILDING BLOCKS
# ------------------------------------------
def test_quadrature_matches_normal_moments():
    rule = gauss_hermite_rule(41)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.sum(rule.weights * rule.nodes ** 2) == pytest.approx(1.0, rel=1e-10)
    assert np.sum(rule.weights * rule.nodes ** 4) == pytest.approx(3.0, rel=1e-10)


def test_grid_validation():
    with pytest.raises(ConfigError, match="at least 16"):
        StateGrid(np.geomspace(1e-6, 1e-4, 8))
    assert StateGrid(np.geomspace(1e-6, 1e-4, 8), allow_coarse=True).n_h == 8
    with pytest.raises(ConfigError):
        StateGrid(np.array([1e-5, 1e-5] + list(np.geomspace(2e-5, 1e-3, 20))))
    grid = default_grid(MOMENTUM_STATE, n_h=48, span=50.0)
    lo, hi = grid.bounds
    assert lo * hi == pytest.approx(MOMENTUM_STATE.reference_variance ** 2)


def test_utility_rejects_log_case():
    with pytest.raises(ConfigError):
        UtilitySpec(0.0)


def test_certainty_equivalent_validates_inputs():
    model = merton_model()
    grid = default_grid(model.state, n_h=16)
    zero = ContinuationSlice.zeros(grid)
    with pytest.raises(ConfigError):
        certainty_equivalent(1.2, 1e-5, 0, zero, model, gauss_hermite_rule())
    with pytest.raises(ConfigError):
        certainty_equivalent(0.5, 0.0, 0, zero, model, gauss_hermite_rule())


def test_zero_allocation_earns_risk_free():
    model = DPModel(MOMENTUM_STATE, MOMENTUM_PRICING, load_bundled_transitions()["momentum"],
                    UtilitySpec(-5.0, 2e-4))
    grid = default_grid(model.state, n_h=16)
    ce = certainty_equivalent(0.0, 1e-5, 1, ContinuationSlice.zeros(grid), model, gauss_hermite_rule())
    assert ce == pytest.approx(2e-4, abs=1e-15)


# ------------------------------------------
# BELLMAN RECURSION
# ------------------------------------------
def test_merton_allocation_small_grid():
    model = merton_model()
    solution = solve_bellman(model, default_grid(model.state, n_h=32), horizon=20)
    np.testing.assert_allclose(solution.policy.pi_star, 0.37 / 5.0, atol=1e-3)


@pytest.mark.slow
def test_merton_allocation_full_grid():
    model = merton_model()
    solution = solve_bellman(model, default_grid(model.state, n_h=200), horizon=500)
    np.testing.assert_allclose(solution.policy.pi_star, 0.074, atol=1e-3)
    assert solution.value.J.shape == (501, 200, 2)
    np.testing.assert_array_equal(solution.value.J[-1], 0.0)


def test_bellman_matches_exhaustive_enumeration():
    model = momentum_model()
    grid = default_grid(model.state, n_h=8, allow_coarse=True)
    quad = gauss_hermite_rule()
    horizon = 3
    solution = solve_bellman(model, grid, horizon, quad=quad, pi_search=201)

    candidates = np.linspace(0.0, 1.0, 201)
    J = np.zeros((horizon + 1, grid.n_h, 2))
    for t in range(horizon - 1, -1, -1):
        nxt = ContinuationSlice(grid.h_nodes, J[t + 1])
        for j, h in enumerate(grid.h_nodes):
            for d in (0, 1):
                best = max(certainty_equivalent(pi, h, d, nxt, model, quad) for pi in candidates)
                J[t, j, d] = model.utility.gamma * best
    np.testing.assert_allclose(solution.value.J, J, rtol=0, atol=1e-6)


def test_policy_stays_in_unit_interval():
    model = momentum_model()
    solution = solve_bellman(model, default_grid(model.state, n_h=24), horizon=10, pi_search=51)
    assert solution.policy.pi_star.min() >= 0.0
    assert solution.policy.pi_star.max() <= 1.0
    assert solution.horizon == 10


def test_horizon_must_be_positive():
    model = merton_model()
    with pytest.raises(ConfigError):
        solve_bellman(model, default_grid(model.state, n_h=16), horizon=0)


# ------------------------------------------
# SIMULATION
# ------------------------------------------
@pytest.fixture(scope="module")
def momentum_solution():
    model = momentum_model()
    return solve_bellman(model, default_grid(model.state, n_h=48), horizon=20, pi_search=51)


@pytest.mark.slow
def test_policy_not_dominated_by_constant_allocations(momentum_solution):
    table = policy_vs_constant_benchmarks(momentum_solution, [0.0, 0.25, 0.5, 0.75, 1.0], w0=1.0,
                                          h0=MOMENTUM_STATE.reference_variance, d0=0, n_paths=10_000, seed=99)
    assert list(table["arm"]) == ["policy", "constant 0", "constant 0.25", "constant 0.5", "constant 0.75",
                                  "constant 1"]
    assert not table["policy_dominated"].any()
    assert (table["expected_utility"] < 0).all()


def test_zero_allocation_locks_risk_free_growth():
    model = momentum_model(risk_free=1e-4)
    solution = solve_bellman(model, default_grid(model.state, n_h=16), horizon=5, pi_search=11)
    table = policy_vs_constant_benchmarks(solution, [0.0], w0=2.0, h0=MOMENTUM_STATE.reference_variance, d0=1,
                                          n_paths=200, seed=1)
    row = table[table["arm"] == "constant 0"].iloc[0]
    assert row["median_log_wealth"] == pytest.approx(math.log(2.0) + 5 * 1e-4)


def test_simulation_independent_of_workers(momentum_solution):
    h0 = MOMENTUM_STATE.reference_variance
    serial = simulate_wealth(momentum_solution, 1.0, h0, 0, n_paths=600, seed=5, block_size=128, workers=1)
    pooled = simulate_wealth(momentum_solution, 1.0, h0, 0, n_paths=600, seed=5, block_size=128, workers=3)
    np.testing.assert_array_equal(serial.log_wealth, pooled.log_wealth)
    assert serial.log_wealth.shape == (600, 21)
    np.testing.assert_array_equal(serial.log_wealth[:, 0], 0.0)


def test_simulation_variances_stay_on_grid(momentum_solution):
    ensemble = simulate_wealth(momentum_solution, 1.0, 1.0, 1, n_paths=300, seed=8)
    lo, hi = momentum_solution.grid.bounds
    assert ensemble.variances.min() >= np.float32(lo) * (1 - 1e-6)
    assert ensemble.variances.max() <= np.float32(hi) * (1 + 1e-6)
    assert set(np.unique(ensemble.states)) <= {0, 1}


def test_simulation_rejects_mismatched_inputs(momentum_solution):
    with pytest.raises(ConfigError):
        simulate_wealth(momentum_solution, 1.0, 1e-5, 0, n_paths=10, seed=1, horizon=30)
    with pytest.raises(ConfigError):
        simulate_wealth(momentum_solution, 0.0, 1e-5, 0, n_paths=10, seed=1)
    with pytest.raises(ConfigError):
        simulate_wealth(momentum_solution, 1.0, 1e-5, 2, n_paths=10, seed=1)


def test_wealth_summary_columns(momentum_solution):
    ensemble = simulate_wealth(momentum_solution, 1.0, 1e-5, 0, n_paths=200, seed=2)
    summary = wealth_summary(ensemble)
    assert list(summary.columns) == ["t", "mean", "q05", "q25", "q50", "q75", "q95"]
    assert len(summary) == 21
    assert (summary["q05"] <= summary["q95"]).all()


def test_surface_files_reproduce_simulation(tmp_path, momentum_solution):
    csv_path, json_path = tmp_path / "surfaces.csv", tmp_path / "meta.json"
    write_surfaces(momentum_solution, csv_path, json_path)
    loaded = read_surfaces(csv_path, json_path)
    np.testing.assert_array_equal(loaded.policy.pi_star, momentum_solution.policy.pi_star)
    assert loaded.model.digest() == momentum_solution.model.digest()
    first = simulate_wealth(momentum_solution, 1.0, 1e-5, 0, n_paths=100, seed=3)
    again = simulate_wealth(loaded, 1.0, 1e-5, 0, n_paths=100, seed=3)
    np.testing.assert_array_equal(first.log_wealth, again.log_wealth)
