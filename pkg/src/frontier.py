"""
Scenario-based long-only efficient frontiers: mean-variance with tangency and
capital market line, and CVaR-constrained frontiers
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import norm, spearmanr

from src.data_model import ReturnPanel
from src.exceptions import ConfigError, DataError, InfeasibleError, NumericError
from src.logger_utils import ColoredLogger as log
from src.risk_metrics import avar_empirical
from src.seeding import substream
from src.vol_models import (ArmaGarchParams, FilterState, NigParams, arma_garch_filter, arma_garch_fit,
                            nig_fit_moments, one_step_moments, standardized_nig)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ScenarioSet:
    returns: np.ndarray         # S x K, equally likely
    asset_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2:
            raise DataError("scenario matrix must be 2-D")
        s, k = r.shape
        if s < k + 1:
            raise DataError(f"need at least K+1 = {k + 1} scenarios, got {s}")
        if not np.all(np.isfinite(r)):
            raise DataError("non-finite scenario returns")
        ids = tuple(self.asset_ids) or tuple(f"A{i + 1:02d}" for i in range(k))
        if len(ids) != k:
            raise DataError("asset ids do not match scenario columns")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "asset_ids", ids)

    @property
    def n_scenarios(self):
        return self.returns.shape[0]

    @property
    def n_assets(self):
        return self.returns.shape[1]

    def to_frame(self):
        return pd.DataFrame(self.returns, columns=list(self.asset_ids))


def _simplex_clean(w):
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    total = w.sum()
    if total <= 0:
        raise NumericError("weights collapsed to zero")
    return w / total


@dataclass(frozen=True)
class FrontierPoint:
    risk: float
    expected_return: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise NumericError("frontier weights leave the simplex")


@dataclass
class FrontierCurve:
    points: List[FrontierPoint]
    tangency: Optional[FrontierPoint]
    risk_free: float
    measure: str                # "std" or "CVaR(level)"
    asset_ids: Tuple[str, ...] = ()
    flags: List[str] = field(default_factory=list)

    @property
    def sharpe(self):
        t = self.tangency
        if t is None or t.risk <= 0:
            return float("nan")
        return (t.expected_return - self.risk_free) / t.risk

    def to_frame(self):
        """risk, expected_return, one weight column per asset; tangency row last"""
        rows = []
        for kind, pts in (("frontier", self.points), ("tangency", [self.tangency] if self.tangency else [])):
            for p in pts:
                row = {"measure": self.measure, "kind": kind, "risk": p.risk, "expected_return": p.expected_return}
                row.update({f"w_{a}": float(x) for a, x in zip(self.asset_ids, p.weights)})
                rows.append(row)
        return pd.DataFrame(rows)


# ------------------------------------------
# SCENARIOS
# ------------------------------------------
def spearman_to_pearson(rho_s):
    """Gaussian-copula correlation matching a rank correlation: 2 sin(pi rho / 6)"""
    return 2.0 * np.sin(np.pi * np.asarray(rho_s, dtype=float) / 6.0)


def nearest_correlation(c, floor=1e-10):
    """Clip eigenvalues at floor and rescale to unit diagonal"""
    c = 0.5 * (np.asarray(c, dtype=float) + np.asarray(c, dtype=float).T)
    values, vectors = np.linalg.eigh(c)
    if values.min() >= floor:
        return c
    repaired = (vectors * np.maximum(values, floor)) @ vectors.T
    scale = np.sqrt(np.diag(repaired))
    log.log("frontier", f"copula correlation repaired (min eigenvalue {values.min():.3g})", 'WARNING')
    return repaired / np.outer(scale, scale)


def build_scenarios(assets: Sequence[Tuple[ArmaGarchParams, Optional[NigParams], FilterState]], n_scenarios, seed,
                    rank_correlation=None, asset_ids=(), reference_draws=200_000, min_scenarios=100) -> ScenarioSet:
    """
    One-step-ahead returns per asset from its ARMA-GARCH filter state with NIG
    (or normal) innovations, joined by a Gaussian copula.

    Args:
        assets: Per asset (parameters, innovation law or None for normal, filter state)
        n_scenarios: S, at least min_scenarios
        rank_correlation: K x K Spearman matrix of innovations (identity when None)
        reference_draws: Size of the per-asset NIG sample used for quantiles
    """
    s = int(n_scenarios)
    if s < min_scenarios:
        raise ConfigError(f"need at least {min_scenarios} scenarios, got {s}")
    k = len(assets)
    if k == 0:
        raise ConfigError("no assets for scenarios")
    if rank_correlation is None:
        corr = np.eye(k)
    else:
        corr = np.asarray(rank_correlation, dtype=float)
        if corr.shape != (k, k):
            raise ConfigError(f"rank correlation must be {k}x{k}")
        corr = nearest_correlation(spearman_to_pearson(corr))
    chol = np.linalg.cholesky(corr + 1e-14 * np.eye(k))

    rng = substream(seed, "build_scenarios")
    g = rng.standard_normal((s, k)) @ chol.T
    out = np.empty((s, k))
    for j, (params, innovation, state) in enumerate(assets):
        mean, h_next = one_step_moments(params, state)
        if innovation is None:
            z = g[:, j]
        else:
            ref = standardized_nig(innovation, reference_draws, substream(seed, "nig_reference", j))
            z = np.quantile(ref, norm.cdf(g[:, j]))
        out[:, j] = mean + math.sqrt(h_next) * z
    return ScenarioSet(out, tuple(asset_ids))


def scenarios_from_history(panel: ReturnPanel, n_scenarios, seed, max_assets=None, reference_draws=200_000,
                           max_iter=4000, max_restarts=5):
    """
    Fit ARMA-GARCH per asset, NIG by moments on the standardized residuals
    (normal when the moments fall outside the NIG region) and the Spearman
    matrix of those residuals, then build scenarios.

    Returns:
        (ScenarioSet, fits table DataFrame)
    """
    ids = list(panel.asset_ids)[: max_assets or panel.n_assets]
    assets, residuals, rows = [], [], []
    for a in ids:
        x = panel.series(a)
        fit = arma_garch_fit(x, max_iter=max_iter, max_restarts=max_restarts)
        filtered = arma_garch_filter(x, fit.params)
        std = filtered.standardized
        try:
            nig = nig_fit_moments(std)
        except NumericError as e:
            log.log("frontier", f"{a}: {e}; normal innovations used", 'WARNING')
            nig = None
        assets.append((fit.params, nig, filtered.state))
        residuals.append(std)
        row = {"asset": a, **fit.params.to_dict(), "loglik": fit.loglik, "aic": fit.aic, "bic": fit.bic,
               "converged": fit.converged, "nig": nig is not None}
        rows.append(row)
    rank = spearmanr(np.column_stack(residuals)).statistic if len(ids) > 1 else None
    if rank is not None and np.ndim(rank) == 0:
        rank = np.array([[1.0, rank], [rank, 1.0]])
    scenarios = build_scenarios(assets, n_scenarios, seed, rank, tuple(ids), reference_draws)
    return scenarios, pd.DataFrame(rows)


# ------------------------------------------
# MEAN-VARIANCE
# ------------------------------------------
def project_simplex(v):
    """Euclidean projection onto {w >= 0, sum w = 1}"""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


class _MeanVarianceSolver:
    """min 0.5 w'Sw - t mu'w on the simplex by accelerated projected gradient, warm-started"""

    def __init__(self, mu, cov, max_iter=20_000, tol=1e-10):
        self.mu, self.cov = mu, cov
        self.step = 1.0 / max(float(np.linalg.eigvalsh(cov).max()), 1e-300)
        self.max_iter, self.tol = max_iter, tol
        self.w = np.full(mu.size, 1.0 / mu.size)

    def solve(self, t):
        w = self.w.copy()
        y, theta = w.copy(), 1.0
        for _ in range(self.max_iter):
            w_new = project_simplex(y - self.step * (self.cov @ y - t * self.mu))
            if np.max(np.abs(w_new - w)) < self.tol:
                w = w_new
                break
            if float((y - w_new) @ (w_new - w)) > 0:
                # momentum points uphill: restart
                y, theta = w_new.copy(), 1.0
                w = w_new
                continue
            theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta ** 2))
            y = w_new + ((theta - 1.0) / theta_new) * (w_new - w)
            w, theta = w_new, theta_new
        self.w = w
        return w

    def risk(self, w):
        return math.sqrt(max(float(w @ self.cov @ w), 0.0))


def _moments(scenarios: ScenarioSet, ridge):
    r = scenarios.returns
    mu = r.mean(axis=0)
    cov = np.cov(r, rowvar=False, ddof=0).reshape(r.shape[1], r.shape[1])
    flags = []
    values = np.linalg.eigvalsh(cov)
    if values.min() <= 1e-12 * max(values.max(), 1e-300):
        cov = cov + ridge * np.eye(cov.shape[0])
        flags.append("ridge")
        log.log("frontier", f"singular scenario covariance, ridge {ridge:g} added", 'WARNING')
    return mu, cov, flags


def mv_frontier(scenarios: ScenarioSet, n_points=50, risk_free=0.0, ridge=1e-10, max_iter=20_000,
                tol=1e-10) -> FrontierCurve:
    """
    For each target standard deviation between the minimum-variance portfolio
    and the highest-mean asset, the long-only portfolio with maximal mean.
    Targets are met by bisection on the return weight t of the penalized
    problem; the tangency portfolio maximizes (mean - r_f) / std.
    """
    mu, cov, flags = _moments(scenarios, ridge)
    ids = scenarios.asset_ids
    if scenarios.n_assets == 1:
        p = FrontierPoint(math.sqrt(cov[0, 0]), float(mu[0]), np.ones(1))
        return FrontierCurve([p], p, risk_free, "std", ids, flags)

    solver = _MeanVarianceSolver(mu, cov, max_iter, tol)
    w_min = solver.solve(0.0)
    sigma_min = solver.risk(w_min)
    top = np.flatnonzero(mu >= mu.max() - 1e-15)
    k_max = top[np.argmin(np.diag(cov)[top])]
    w_max = np.zeros(mu.size)
    w_max[k_max] = 1.0
    sigma_max = solver.risk(w_max)

    t_scale = float(np.linalg.eigvalsh(cov).max()) / max(float(np.ptp(mu)), 1e-300)
    solved = {0.0: w_min}

    def at(t):
        if t not in solved:
            solved[t] = solver.solve(t)
        return solved[t]

    points, params = [], []
    targets = np.linspace(sigma_min, sigma_max, int(n_points)) if n_points > 1 else np.array([sigma_min])
    t_lo = 0.0
    for target in targets:
        if target <= sigma_min:
            w, t_hit = w_min, 0.0
        elif target >= sigma_max:
            w, t_hit = w_max, math.inf
        else:
            lo, hi = t_lo, max(t_lo, t_scale)
            while solver.risk(at(hi)) < target and hi < 1e12 * t_scale:
                lo, hi = hi, 2.0 * hi
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if solver.risk(at(mid)) < target:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-10 * hi:
                    break
            t_hit = hi
            w = at(hi)
            t_lo = lo
        w = _simplex_clean(w)
        points.append(FrontierPoint(solver.risk(w), float(mu @ w), w))
        params.append(t_hit)

    drops = [i for i in range(1, len(points)) if points[i].expected_return < points[i - 1].expected_return - 1e-9]
    if drops:
        log.log("frontier", f"mean-variance curve not monotone at {len(drops)} point(s); raise max_iter", 'WARNING')
        flags.append("not_monotone")

    tangency = _mv_tangency(solver, mu, points, params, risk_free, t_scale)
    return FrontierCurve(points, tangency, risk_free, "std", ids, flags)


def _sharpe(p, risk_free):
    return (p.expected_return - risk_free) / p.risk if p.risk > 0 else -math.inf


def _mv_tangency(solver, mu, points, params, risk_free, t_scale):
    """Best curve point, refined by golden-section search over ln t between its neighbours"""
    scores = [_sharpe(p, risk_free) for p in points]
    i = int(np.argmax(scores))

    def t_at(j, default):
        if 0 <= j < len(params) and 0.0 < params[j] < math.inf:
            return params[j]
        return default

    lo_t, hi_t = t_at(i - 1, t_scale * 1e-9), t_at(i + 1, t_scale * 1e9)
    if not hi_t > lo_t:
        return points[i]
    a, b = math.log(lo_t), math.log(hi_t)

    def score(log_t):
        w = _simplex_clean(solver.solve(math.exp(log_t)))
        return _sharpe(FrontierPoint(solver.risk(w), float(mu @ w), w), risk_free), w

    for _ in range(100):
        if b - a < 1e-10:
            break
        c, e = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        if score(c)[0] > score(e)[0]:
            b = e
        else:
            a = c
    s, w = score(0.5 * (a + b))
    if s > scores[i]:
        return FrontierPoint(solver.risk(w), float(mu @ w), w)
    return points[i]


def capital_market_line(curve: FrontierCurve, risks) -> np.ndarray:
    """r_f + Sharpe(tangency) * sigma"""
    return curve.risk_free + curve.sharpe * np.asarray(risks, dtype=float)


# ------------------------------------------
# CVaR
# ------------------------------------------
class _CvarProgram:
    """
    Auxiliary-variable linear program over x = [w (K), c, u (S)]:
    CVaR(w) = min_c c + sum_s u_s / (S tail), u_s >= -R_s w - c, u >= 0
    """

    def __init__(self, returns, level):
        self.r = returns
        s, k = returns.shape
        self.s, self.k = s, k
        self.tail = 1.0 - level
        if s * self.tail < 1.0 - 1e-12:
            raise DataError(f"{s} scenarios leave less than one in the {self.tail:.2%} tail")
        self.cvar_row = np.concatenate([np.zeros(k), [1.0], np.full(s, 1.0 / (s * self.tail))])
        self.shortfall = sparse.hstack([sparse.csr_matrix(-returns), sparse.csr_matrix(-np.ones((s, 1))),
                                        -sparse.identity(s, format="csr")], format="csr")
        self.a_eq = np.concatenate([np.ones(k), [0.0], np.zeros(s)])[None, :]
        self.bounds = [(0, None)] * k + [(None, None)] + [(0, None)] * s
        self.mu = returns.mean(axis=0)

    def _solve(self, objective, bound=None):
        a_ub, b_ub = self.shortfall, np.zeros(self.s)
        if bound is not None:
            a_ub = sparse.vstack([a_ub, sparse.csr_matrix(self.cvar_row)], format="csr")
            b_ub = np.concatenate([b_ub, [bound]])
        res = linprog(objective, A_ub=a_ub, b_ub=b_ub, A_eq=self.a_eq, b_eq=[1.0], bounds=self.bounds,
                      method="highs")
        return res

    def min_cvar(self):
        res = self._solve(self.cvar_row)
        if res.status != 0:
            raise NumericError(f"minimum-CVaR program failed: {res.message}")
        return _simplex_clean(res.x[: self.k]), float(res.fun)

    def max_mean(self, bound):
        objective = np.concatenate([-self.mu, [0.0], np.zeros(self.s)])
        res = self._solve(objective, bound)
        if res.status == 2:
            return None
        if res.status != 0:
            raise NumericError(f"CVaR-bounded program failed: {res.message}")
        return _simplex_clean(res.x[: self.k])

    def cvar(self, w):
        return avar_empirical(self.r @ w, self.tail)


def cvar_max_return(scenarios: ScenarioSet, level, bound) -> FrontierPoint:
    """Highest-mean long-only portfolio with empirical CVaR at level <= bound"""
    program = _CvarProgram(scenarios.returns, float(level))
    w_min, minimum = program.min_cvar()
    if bound < minimum - 1e-12:
        raise InfeasibleError(f"CVaR bound {bound:.6g} below the minimum achievable {minimum:.6g}", minimum=minimum)
    w = program.max_mean(max(bound, minimum))
    if w is None:
        w = w_min
    return FrontierPoint(program.cvar(w), float(program.mu @ w), w)


def cvar_frontier(scenarios: ScenarioSet, level, n_points=50, risk_free=0.0, max_workers=1) -> FrontierCurve:
    """
    Bounds run from the minimum achievable CVaR to the CVaR of the highest-mean
    asset; each point is the auxiliary-variable LP solved with HiGHS. The
    tangency point maximizes (mean - r_f) / CVaR.
    """
    level = float(level)
    if not 0.0 < level < 1.0:
        raise ConfigError(f"CVaR level must lie in (0, 1), got {level}")
    program = _CvarProgram(scenarios.returns, level)
    mu = program.mu
    w_min, minimum = program.min_cvar()
    top = np.flatnonzero(mu >= mu.max() - 1e-15)
    vertex_risk = [program.cvar(np.eye(mu.size)[j]) for j in top]
    k_max = top[int(np.argmin(vertex_risk))]
    upper = max(min(vertex_risk), minimum)
    bounds = np.linspace(minimum, upper, int(n_points)) if n_points > 1 else np.array([minimum])

    def solve(bound):
        if bound >= upper:
            w = np.eye(mu.size)[k_max]
        else:
            w = program.max_mean(bound)
            if w is None:
                w = w_min
        return FrontierPoint(program.cvar(w), float(mu @ w), w)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            points = list(pool.map(solve, bounds))
    else:
        points = [solve(b) for b in bounds]

    for i in range(1, len(points)):
        if points[i].expected_return < points[i - 1].expected_return - 1e-7:
            raise NumericError("CVaR frontier is not monotone")

    positive = [p for p in points if p.risk > 0]
    tangency = max(positive, key=lambda p: (p.expected_return - risk_free) / p.risk) if positive else None
    return FrontierCurve(points, tangency, risk_free, f"CVaR({level:g})", scenarios.asset_ids)
