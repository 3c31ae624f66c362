"""
Finite-horizon allocation between one risky portfolio and the risk-free rate
under a GJR variance state and a two-state regime. Backward induction on a
log-spaced variance grid, certainty-equivalent objective, Monte Carlo checks.
"""
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp

from src.exceptions import ConfigError, DataError, NumericError
from src.logger_utils import ColoredLogger as log
from src.regime_model import RegimePricing, TransitionMatrix
from src.seeding import block_slices, substream
from src.vol_models import GjrStateParams, gjr_state_step

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class UtilitySpec:
    gamma: float            # CRRA exponent, U(W) = W^gamma / gamma
    risk_free: float = 0.0  # per period

    def __post_init__(self):
        if self.gamma == 0 or not math.isfinite(self.gamma):
            raise ConfigError(f"CRRA gamma must be finite and nonzero, got {self.gamma}")

    def utility(self, log_wealth):
        return np.exp(self.gamma * np.asarray(log_wealth)) / self.gamma


@dataclass(frozen=True)
class StateGrid:
    h_nodes: np.ndarray
    allow_coarse: bool = False

    def __post_init__(self):
        h = np.asarray(self.h_nodes, dtype=float).ravel()
        minimum = 2 if self.allow_coarse else 16
        if h.size < minimum:
            raise ConfigError(f"variance grid needs at least {minimum} nodes, got {h.size}")
        if np.any(h <= 0) or np.any(np.diff(h) <= 0):
            raise ConfigError("variance nodes must be positive and strictly increasing")
        h.setflags(write=False)
        object.__setattr__(self, "h_nodes", h)

    @property
    def n_h(self):
        return self.h_nodes.size

    @property
    def bounds(self):
        return float(self.h_nodes[0]), float(self.h_nodes[-1])


@dataclass(frozen=True)
class QuadratureRule:
    """Expectation rule for a standard normal; a node at 0 is harmless because the leverage term carries z^2"""
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.nodes, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if z.size != w.size or z.size == 0:
            raise ConfigError("quadrature nodes and weights differ in length")
        if np.any(w <= 0):
            raise ConfigError("quadrature weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError(f"quadrature weights sum to {w.sum()!r}, expected 1")
        for k in (1, 3):
            if abs(np.sum(w * z ** k)) > 1e-10:
                raise ConfigError(f"quadrature odd moment {k} does not vanish")
        object.__setattr__(self, "nodes", z)
        object.__setattr__(self, "weights", w)


def gauss_hermite_rule(n=41) -> QuadratureRule:
    """Probabilists' Gauss-Hermite nodes with weights normalized to the N(0,1) law"""
    if n < 1:
        raise ConfigError("quadrature order must be >= 1")
    z, w = hermegauss(int(n))
    w = w / math.sqrt(2.0 * math.pi)
    return QuadratureRule(z, w / w.sum())


def default_grid(params: GjrStateParams, n_h=200, span=50.0, allow_coarse=False) -> StateGrid:
    """n_h log-spaced nodes over [h_ref / span, h_ref * span] around the reference variance"""
    if span <= 1.0:
        raise ConfigError("grid span factor must exceed 1")
    h_ref = params.reference_variance
    return StateGrid(np.geomspace(h_ref / span, h_ref * span, int(n_h)), allow_coarse=allow_coarse)


@dataclass(frozen=True)
class DPModel:
    state: GjrStateParams
    pricing: RegimePricing
    transition: TransitionMatrix
    utility: UtilitySpec

    def lambdas(self):
        return np.array([self.pricing.lambda0, self.pricing.lambda0 + self.pricing.lambda1])

    def to_dict(self):
        return {
            "state": self.state.to_dict(),
            "pricing": {"lambda0": self.pricing.lambda0, "lambda1": self.pricing.lambda1},
            "transition": self.transition.to_list(),
            "utility": {"gamma": self.utility.gamma, "risk_free": self.utility.risk_free},
        }

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ContinuationSlice:
    """J_{t+1}(h, d): linear in ln h between nodes, flat beyond the ends"""
    h_nodes: np.ndarray
    values: np.ndarray          # n_h x 2

    @property
    def h_floor(self):
        return float(self.h_nodes[0])

    @classmethod
    def zeros(cls, grid: StateGrid):
        return cls(grid.h_nodes, np.zeros((grid.n_h, 2)))

    def __call__(self, h, d):
        return np.interp(np.log(h), np.log(self.h_nodes), self.values[:, int(d)])


@dataclass(frozen=True)
class ValueSurface:
    J: np.ndarray               # (T+1) x n_h x 2, J[T] == 0


@dataclass(frozen=True)
class PolicySurface:
    pi_star: np.ndarray         # T x n_h x 2

    def __post_init__(self):
        p = self.pi_star
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise NumericError("policy left [0, 1]")


@dataclass
class DPSolution:
    model: DPModel
    grid: StateGrid
    quad: QuadratureRule
    value: ValueSurface
    policy: PolicySurface
    extrapolation_mass: float = 0.0
    flags: List[str] = field(default_factory=list)

    @property
    def horizon(self):
        return self.policy.pi_star.shape[0]

    def policy_at(self, t, h, d):
        """pi*(t, h, d) with linear interpolation in ln h, clamped to the grid"""
        logh = np.log(self.grid.h_nodes)
        x = np.clip(np.log(h), logh[0], logh[-1])
        d = np.asarray(d, dtype=int)
        table = self.policy.pi_star[t]
        return np.where(d == 1, np.interp(x, logh, table[:, 1]), np.interp(x, logh, table[:, 0]))


# ------------------------------------------
# CERTAINTY EQUIVALENT
# ------------------------------------------
def certainty_equivalent(pi, h, d, J_next: Union[ContinuationSlice, Callable], model: DPModel,
                         quad: QuadratureRule) -> float:
    """
    (1/gamma) ln sum_{d'} p_{d,d'} sum_i w_i exp{gamma (pi (lambda(d) h + sqrt(h) z_i - r_f) + r_f)
    + J_next(h'(z_i), d')}, evaluated with log-sum-exp
    """
    if not 0.0 <= pi <= 1.0:
        raise ConfigError(f"allocation must lie in [0, 1], got {pi}")
    if not h > 0:
        raise ConfigError(f"variance must be > 0, got {h}")
    gamma, rf = model.utility.gamma, model.utility.risk_free
    z, w = quad.nodes, quad.weights
    floor = J_next.h_floor if isinstance(J_next, ContinuationSlice) else None
    h_next = gjr_state_step(np.full(z.size, float(h)), z, model.state, floor=floor)
    growth = pi * (model.lambdas()[int(d)] * h + math.sqrt(h) * z - rf) + rf
    with np.errstate(divide="ignore"):
        log_p = np.log(model.transition.p[int(d)])
    terms = [gamma * growth + J_next(h_next, dn) + np.log(w) + log_p[dn] for dn in (0, 1)]
    ce = float(logsumexp(np.concatenate(terms))) / gamma
    if not math.isfinite(ce):
        raise NumericError(f"certainty equivalent overflow at pi={pi}, h={h}, d={d}")
    return ce


# ------------------------------------------
# BACKWARD INDUCTION
# ------------------------------------------
def _interp_plan(log_nodes, log_x):
    x = np.clip(log_x, log_nodes[0], log_nodes[-1])
    idx = np.clip(np.searchsorted(log_nodes, x, side="right") - 1, 0, log_nodes.size - 2)
    frac = (x - log_nodes[idx]) / (log_nodes[idx + 1] - log_nodes[idx])
    return idx, frac


def _ce_matrix(pi, A, LB, gamma, rf):
    """pi broadcastable to (..., n_h, 2); A and LB are n_h x n_q x 2"""
    x = gamma * (pi[..., :, None, :] * A + rf) + LB
    return logsumexp(x, axis=-2) / gamma


def solve_bellman(model: DPModel, grid: StateGrid, horizon: int, quad: Optional[QuadratureRule] = None,
                  pi_search=101, golden_tol=1e-5, extrapolation_warn=1e-3) -> DPSolution:
    """
    Args:
        model: Variance recursion, regime pricing, transition matrix, utility
        grid: Variance nodes
        horizon: Number of decision periods T
        quad: Standard-normal rule (default 41-node Gauss-Hermite)
        pi_search: Points of the global [0, 1] allocation grid
        golden_tol: Bracket width at which the local golden-section search stops
    """
    if int(horizon) < 1:
        raise ConfigError("horizon must be at least 1")
    if pi_search < 2:
        raise ConfigError("pi_search needs at least 2 points")
    quad = quad or gauss_hermite_rule()
    horizon = int(horizon)
    gamma, rf = model.utility.gamma, model.utility.risk_free
    h = grid.h_nodes
    z, w = quad.nodes, quad.weights
    log_nodes = np.log(h)
    h_lo, h_hi = grid.bounds

    h_raw = gjr_state_step(h[:, None], z[None, :], model.state, floor=-np.inf)
    outside = (h_raw < h_lo) | (h_raw > h_hi)
    centre = int(np.argmin(np.abs(log_nodes - 0.5 * (log_nodes[0] + log_nodes[-1]))))
    mass = float(np.sum(w * outside[centre]))
    flags = []
    if mass > extrapolation_warn:
        log.log("dp", f"{mass:.2%} of next-step variance mass leaves the grid; flat extrapolation used", 'WARNING')
        flags.append("extrapolation")
    h_next = np.maximum(h_raw, h_lo)
    idx, frac = _interp_plan(log_nodes, np.log(h_next))

    lambdas = model.lambdas()
    A = (lambdas[None, None, :] * h[:, None, None] + np.sqrt(h)[:, None, None] * z[None, :, None] - rf)
    with np.errstate(divide="ignore"):
        log_p = np.log(model.transition.p)
    log_w = np.log(w)

    pi_grid = np.linspace(0.0, 1.0, int(pi_search))
    step = pi_grid[1] - pi_grid[0]
    J = np.zeros((horizon + 1, grid.n_h, 2))
    policy = np.zeros((horizon, grid.n_h, 2))

    for t in range(horizon - 1, -1, -1):
        Jn = J[t + 1]
        jn = (1.0 - frac)[..., None] * Jn[idx] + frac[..., None] * Jn[idx + 1]       # n_h x n_q x d'
        LB = logsumexp(jn[:, :, None, :] + log_p[None, None, :, :], axis=-1) + log_w[None, :, None]

        ce_grid = _ce_matrix(np.broadcast_to(pi_grid[:, None, None], (pi_grid.size, grid.n_h, 2)), A, LB, gamma, rf)
        best = np.argmax(ce_grid, axis=0)
        pi_g = pi_grid[best]
        ce_g = np.take_along_axis(ce_grid, best[None], axis=0)[0]

        a = np.maximum(pi_g - step, 0.0)
        b = np.minimum(pi_g + step, 1.0)
        while np.max(b - a) > golden_tol:
            c = b - GOLDEN * (b - a)
            e = a + GOLDEN * (b - a)
            left = _ce_matrix(c, A, LB, gamma, rf) > _ce_matrix(e, A, LB, gamma, rf)
            b = np.where(left, e, b)
            a = np.where(left, a, c)
        pi_r = np.clip(0.5 * (a + b), 0.0, 1.0)
        ce_r = _ce_matrix(pi_r, A, LB, gamma, rf)

        take = ce_r > ce_g
        pi_t = np.where(take, pi_r, pi_g)
        ce_t = np.where(take, ce_r, ce_g)
        if not np.all(np.isfinite(ce_t)):
            j, d = np.argwhere(~np.isfinite(ce_t))[0]
            raise NumericError(f"certainty equivalent overflow at t={t}, h={h[j]:.3g}, d={d}")
        policy[t] = pi_t
        J[t] = gamma * ce_t

    return DPSolution(model, grid, quad, ValueSurface(J), PolicySurface(policy), mass, flags)


# ------------------------------------------
# SIMULATION
# ------------------------------------------
@dataclass
class WealthEnsemble:
    """Per-path series; row = path, column = period (log_wealth/states/variances have T+1 columns)"""
    log_wealth: np.ndarray
    states: np.ndarray
    variances: np.ndarray
    allocations: np.ndarray
    returns: np.ndarray

    @property
    def terminal_log_wealth(self):
        return self.log_wealth[:, -1]


def _state_paths(model, grid, h0, d0, horizon, z, u):
    """Variance (clamped to the grid) and regime paths driven by z and u"""
    n = z.shape[0]
    h_lo, h_hi = grid.bounds
    h = np.empty((n, horizon + 1))
    d = np.empty((n, horizon + 1), dtype=np.int8)
    h[:, 0] = np.clip(h0, h_lo, h_hi)
    d[:, 0] = d0
    up = model.transition.p[:, 1]
    for t in range(horizon):
        h[:, t + 1] = np.clip(gjr_state_step(h[:, t], z[:, t], model.state, floor=h_lo), h_lo, h_hi)
        d[:, t + 1] = (u[:, t] < up[d[:, t]]).astype(np.int8)
    return h, d


def _draws(seed, block, n, horizon):
    rng = substream(seed, "simulate_wealth", block)
    return rng.standard_normal((n, horizon)), rng.random((n, horizon))


def _policy_log_growth(solution, h, d, z, policy):
    """Log-wealth increments for a policy: a DPSolution or a constant allocation"""
    model = solution.model
    rf = model.utility.risk_free
    horizon = z.shape[1]
    lam = model.lambdas()[d[:, :horizon]]
    r = lam * h[:, :horizon] + np.sqrt(h[:, :horizon]) * z
    if policy is None:
        pi = np.column_stack([solution.policy_at(t, h[:, t], d[:, t]) for t in range(horizon)])
    else:
        pi = np.full_like(r, float(policy))
    return pi * (r - rf) + rf, pi, r


def simulate_wealth(solution: DPSolution, w0, h0, d0, n_paths, seed, horizon=None, block_size=2000,
                    workers=1) -> WealthEnsemble:
    """
    W_{t+1} = W_t exp{pi*(h_t, D_t)(r_t - r_f) + r_f} with r_t = lambda(D_t) h_t + sqrt(h_t) z_t.
    h follows the GJR step clipped to the grid bounds.
    Blocks of paths use their own seed substreams, so results do not depend on workers.
    """
    horizon = solution.horizon if horizon is None else int(horizon)
    if horizon != solution.horizon:
        raise ConfigError(f"policy horizon {solution.horizon} differs from simulation length {horizon}")
    if w0 <= 0:
        raise ConfigError("initial wealth must be > 0")
    if d0 not in (0, 1):
        raise ConfigError("initial regime must be 0 or 1")

    def run(item):
        b, rows = item
        n = rows.stop - rows.start
        z, u = _draws(seed, b, n, horizon)
        h, d = _state_paths(solution.model, solution.grid, h0, d0, horizon, z, u)
        growth, pi, r = _policy_log_growth(solution, h, d, z, None)
        lw = np.concatenate([np.full((n, 1), math.log(w0)), math.log(w0) + np.cumsum(growth, axis=1)], axis=1)
        return lw, d, h.astype(np.float32), pi.astype(np.float32), r.astype(np.float32)

    items = block_slices(int(n_paths), int(block_size))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, items))
    else:
        parts = [run(i) for i in items]
    stacked = [np.concatenate([p[k] for p in parts], axis=0) for k in range(5)]
    if not np.all(np.isfinite(stacked[0])):
        log.log("simulate", "non-finite log-wealth in simulation", 'WARNING')
    return WealthEnsemble(*stacked)


def wealth_summary(ensemble: WealthEnsemble, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)) -> pd.DataFrame:
    """Per-period mean and quantiles of log-wealth"""
    lw = ensemble.log_wealth
    frame = pd.DataFrame({"t": np.arange(lw.shape[1]), "mean": lw.mean(axis=0)})
    for q in quantiles:
        frame[f"q{int(round(q * 100)):02d}"] = np.quantile(lw, q, axis=0)
    return frame


def policy_vs_constant_benchmarks(solution: DPSolution, constants: Sequence[float], w0, h0, d0, n_paths, seed,
                                  block_size=2000, workers=1) -> pd.DataFrame:
    """
    Monte Carlo E[W_T^gamma / gamma] for the solved policy and each constant
    allocation, all driven by the same shocks. The policy is flagged as
    dominated by an arm when its estimate falls more than 2 combined standard
    errors below that arm.
    """
    horizon = solution.horizon
    arms = [None] + [float(c) for c in constants]
    for c in constants:
        if not 0.0 <= c <= 1.0:
            raise ConfigError(f"constant allocation {c} outside [0, 1]")

    def run(item):
        b, rows = item
        n = rows.stop - rows.start
        z, u = _draws(seed, b, n, horizon)
        h, d = _state_paths(solution.model, solution.grid, h0, d0, horizon, z, u)
        out = []
        for arm in arms:
            growth, _, _ = _policy_log_growth(solution, h, d, z, arm)
            out.append(math.log(w0) + growth.sum(axis=1))
        return np.vstack(out)

    items = block_slices(int(n_paths), int(block_size))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, items))
    else:
        parts = [run(i) for i in items]
    terminal = np.concatenate(parts, axis=1)
    util = solution.model.utility.utility(terminal)
    means = util.mean(axis=1)
    ses = util.std(axis=1, ddof=1) / math.sqrt(util.shape[1])

    rows = []
    for k, arm in enumerate(arms):
        bound = 2.0 * math.sqrt(ses[0] ** 2 + ses[k] ** 2)
        rows.append({
            "arm": "policy" if arm is None else f"constant {arm:g}",
            "pi": np.nan if arm is None else arm,
            "expected_utility": float(means[k]),
            "std_error": float(ses[k]),
            "median_log_wealth": float(np.median(terminal[k])),
            "policy_dominated": bool(arm is not None and means[0] < means[k] - bound),
        })
    return pd.DataFrame(rows)


# ------------------------------------------
# SURFACE FILES
# ------------------------------------------
def surfaces_frame(solution: DPSolution) -> pd.DataFrame:
    """Columnar (t, h, d, pi_star, J) rows for t < T"""
    horizon, n_h = solution.horizon, solution.grid.n_h
    t, j, d = np.meshgrid(np.arange(horizon), np.arange(n_h), np.arange(2), indexing="ij")
    return pd.DataFrame({
        "t": t.ravel(),
        "h": solution.grid.h_nodes[j.ravel()],
        "d": d.ravel(),
        "pi_star": solution.policy.pi_star.ravel(),
        "J": solution.value.J[:horizon].ravel(),
    })


def surface_metadata(solution: DPSolution) -> Dict:
    return {
        "horizon": solution.horizon,
        "h_nodes": solution.grid.h_nodes.tolist(),
        "quadrature_order": int(solution.quad.nodes.size),
        "model": solution.model.to_dict(),
        "model_hash": solution.model.digest(),
        "extrapolation_mass": solution.extrapolation_mass,
        "flags": list(solution.flags),
    }


def write_surfaces(solution: DPSolution, csv_path, json_path):
    surfaces_frame(solution).to_csv(csv_path, index=False, float_format="%.17g")
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(surface_metadata(solution), f, indent=2, sort_keys=True)


def read_surfaces(csv_path, json_path) -> DPSolution:
    """Rebuild a DPSolution from the files written by write_surfaces"""
    try:
        with open(json_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
        frame = pd.read_csv(csv_path)
    except FileNotFoundError as e:
        raise DataError(f"File not found: {e.filename}")
    m = meta["model"]
    model = DPModel(
        GjrStateParams.from_dict(m["state"]),
        RegimePricing(**m["pricing"]),
        TransitionMatrix(np.asarray(m["transition"], dtype=float)),
        UtilitySpec(**m["utility"]),
    )
    grid = StateGrid(np.asarray(meta["h_nodes"]), allow_coarse=True)
    horizon = int(meta["horizon"])
    frame = frame.sort_values(["t", "h", "d"])
    shape = (horizon, grid.n_h, 2)
    if len(frame) != np.prod(shape):
        raise DataError(f"{csv_path}: expected {np.prod(shape)} rows, got {len(frame)}")
    J = np.zeros((horizon + 1, grid.n_h, 2))
    J[:horizon] = frame["J"].to_numpy().reshape(shape)
    policy = frame["pi_star"].to_numpy().reshape(shape)
    return DPSolution(model, grid, gauss_hermite_rule(meta["quadrature_order"]), ValueSurface(J),
                      PolicySurface(policy), meta.get("extrapolation_mass", 0.0), list(meta.get("flags", [])))
