"""
Innovation laws and volatility filters: NIG sampling/fitting, ARMA(1,1)-GARCH(1,1),
fractional differencing, ARFIMA(1,d,1)-FIGARCH(1,d,1) and the GJR state step
"""
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import signal
from scipy.optimize import minimize

import config as cfg
from src.exceptions import ConfigError, ConvergenceError, DataError, NumericError
from src.logger_utils import ColoredLogger as log
from src.risk_metrics import ratio
from src.seeding import block_slices, substream

LOG_2PI = math.log(2.0 * math.pi)
WEIGHT_TOL = 1e-12                  # rounding allowed on an ARCH weight before it counts as negative


class _Params:
    """JSON helpers shared by the parameter dataclasses"""

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names - {"_note"}
        if unknown:
            raise ConfigError(f"{cls.__name__}: unknown fields {sorted(unknown)}")
        try:
            return cls(**{k: v for k, v in data.items() if k in names})
        except TypeError as e:
            raise ConfigError(f"{cls.__name__}: {e}")


# ------------------------------------------
# NIG
# ------------------------------------------
@dataclass(frozen=True)
class NigParams(_Params):
    alpha: float
    beta: float
    mu: float
    delta: float

    def __post_init__(self):
        if not (self.alpha > abs(self.beta)):
            raise ConfigError(f"NIG needs alpha > |beta| (alpha={self.alpha}, beta={self.beta})")
        if not self.delta > 0:
            raise ConfigError(f"NIG needs delta > 0 (delta={self.delta})")

    @property
    def gamma(self):
        return math.sqrt(self.alpha ** 2 - self.beta ** 2)


def nig_moments(params: NigParams):
    """(mean, variance, skewness, raw kurtosis)"""
    a, b, d, g = params.alpha, params.beta, params.delta, params.gamma
    mean = params.mu + d * b / g
    var = d * a ** 2 / g ** 3
    skew = 3.0 * b / (a * math.sqrt(d * g))
    kurt = 3.0 + 3.0 * (1.0 + 4.0 * b ** 2 / a ** 2) / (d * g)
    return mean, var, skew, kurt


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(seed, "nig_sample")


def nig_sample(params: NigParams, n, seed) -> np.ndarray:
    """Inverse-Gaussian mixing: V ~ IG(delta/gamma, delta^2), X = mu + beta V + sqrt(V) Z"""
    rng = _rng(seed)
    n = int(n)
    v = rng.wald(params.delta / params.gamma, params.delta ** 2, size=n)
    z = rng.standard_normal(n)
    return params.mu + params.beta * v + np.sqrt(v) * z


def standardized_nig(params: NigParams, n, rng) -> np.ndarray:
    """NIG draws shifted/scaled by the theoretical moments to mean 0, variance 1"""
    mean, var, _, _ = nig_moments(params)
    return (nig_sample(params, n, rng) - mean) / math.sqrt(var)


def nig_fit_moments(sample) -> NigParams:
    """
    Method-of-moments NIG fit matching mean, variance, skewness and kurtosis.

    Feasible only when kurtosis > 3 + 5/3 skewness^2.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 100:
        raise DataError(f"NIG moment fit needs at least 100 observations, got {x.size}")
    m = float(x.mean())
    dev = x - m
    v = float(np.mean(dev ** 2))
    if v <= 0:
        raise DataError("zero variance sample")
    s = float(np.mean(dev ** 3) / v ** 1.5)
    excess = float(np.mean(dev ** 4) / v ** 2) - 3.0
    if excess <= 5.0 * s ** 2 / 3.0:
        raise NumericError(
            f"moments outside the NIG region (excess kurtosis {excess:.4f} <= 5/3 skew^2 = {5 * s ** 2 / 3:.4f})")
    zeta = 3.0 / (excess - 4.0 * s ** 2 / 3.0)        # delta * gamma
    rho = s * math.sqrt(zeta) / 3.0                    # beta / alpha
    gamma = math.sqrt(zeta / ((1.0 - rho ** 2) * v))
    delta = zeta / gamma
    alpha = gamma / math.sqrt(1.0 - rho ** 2)
    beta = rho * alpha
    return NigParams(alpha=alpha, beta=beta, mu=m - delta * beta / gamma, delta=delta)


# ------------------------------------------
# FRACTIONAL DIFFERENCING
# ------------------------------------------
def fractional_diff_weights(d, lag) -> np.ndarray:
    """Coefficients of (1 - L)^d up to L^lag: w_0 = 1, w_k = w_{k-1} (k - 1 - d) / k"""
    lag = int(lag)
    if lag < 1:
        raise ConfigError("lag must be >= 1")
    w = np.empty(lag + 1)
    w[0] = 1.0
    for k in range(1, lag + 1):
        w[k] = w[k - 1] * (k - 1 - d) / k
    return w


def _causal_convolve(x, kernel):
    """y_t = sum_k kernel_k x_{t-k}, first len(x) terms"""
    return signal.convolve(x, kernel, mode="full")[: x.size]


# ------------------------------------------
# ARMA(1,1)-GARCH(1,1)
# ------------------------------------------
@dataclass(frozen=True)
class ArmaGarchParams(_Params):
    mu: float
    ar: float
    ma: float
    omega: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError(f"omega must be > 0 (omega={self.omega})")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")

    @property
    def stationary(self):
        return self.alpha + self.beta < 1.0

    @property
    def unconditional_variance(self):
        return self.omega / (1.0 - self.alpha - self.beta) if self.stationary else None


@dataclass(frozen=True)
class FilterState:
    """Last observation, last residual and the next-period variance"""
    x_last: float
    eps_last: float
    h_next: float


@dataclass(frozen=True)
class GarchFilterResult:
    residuals: np.ndarray
    variances: np.ndarray
    state: FilterState

    @property
    def standardized(self):
        return self.residuals / np.sqrt(self.variances)


def _initial_variance(residuals, unconditional, window):
    if unconditional is not None:
        return unconditional
    head = residuals[: min(window, residuals.size)]
    return float(np.mean(head ** 2)) if head.size else 0.0


def arma_residuals(series, mu, ar, ma):
    """eps_t = (x_t - mu) - ar (x_{t-1} - mu) - ma eps_{t-1}, zero pre-sample"""
    y = np.asarray(series, dtype=float) - mu
    return signal.lfilter([1.0, -ar], [1.0, ma], y)


def arma_garch_filter(series, params: ArmaGarchParams, init_window=cfg.INIT_VARIANCE_WINDOW) -> GarchFilterResult:
    """
    Mean-equation residuals and h_t = omega + alpha eps_{t-1}^2 + beta h_{t-1};
    h_0 is the unconditional variance when alpha + beta < 1, else the sample
    variance of the first init_window residuals.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 10:
        raise DataError(f"filter needs at least 10 observations, got {x.size}")
    if not params.stationary:
        log.log("garch", f"alpha + beta = {params.alpha + params.beta:.4f} >= 1 (not covariance stationary)", 'WARNING')
    eps = arma_residuals(x, params.mu, params.ar, params.ma)
    h0 = _initial_variance(eps, params.unconditional_variance, init_window)
    if h0 <= 0:
        raise NumericError("initial variance is not positive")
    h = np.empty_like(eps)
    h[0] = h0
    if eps.size > 1:
        drive = params.omega + params.alpha * eps[:-1] ** 2
        h[1:] = signal.lfilter([1.0], [1.0, -params.beta], drive, zi=[params.beta * h0])[0]
    h_next = params.omega + params.alpha * eps[-1] ** 2 + params.beta * h[-1]
    return GarchFilterResult(eps, h, FilterState(float(x[-1]), float(eps[-1]), float(h_next)))


def one_step_moments(params: ArmaGarchParams, state: FilterState):
    """Conditional mean and variance of the next return"""
    mean = params.mu + params.ar * (state.x_last - params.mu) + params.ma * state.eps_last
    return mean, state.h_next


def steady_state(params: ArmaGarchParams, h=None) -> FilterState:
    """Start-up state: x at its mean, no shock, unconditional (or given) variance"""
    h = h if h is not None else params.unconditional_variance
    if h is None:
        raise ConfigError("non-stationary parameters need an explicit initial variance")
    return FilterState(params.mu, 0.0, float(h))


def _innovations(innovation, shape, rng):
    if innovation is None:
        return rng.standard_normal(shape)
    return standardized_nig(innovation, int(np.prod(shape)), rng).reshape(shape)


def _simulate_block(params, innovation, horizon, n, state, rng):
    z = _innovations(innovation, (n, horizon), rng)
    out = np.empty((n, horizon))
    dev = np.full(n, state.x_last - params.mu)
    eps = np.full(n, state.eps_last)
    h = np.full(n, state.h_next)
    for t in range(horizon):
        shock = np.sqrt(h) * z[:, t]
        dev = params.ar * dev + params.ma * eps + shock
        out[:, t] = params.mu + dev
        eps = shock
        h = params.omega + params.alpha * eps ** 2 + params.beta * h
    return out


def arma_garch_simulate(params: ArmaGarchParams, innovation: Optional[NigParams], horizon, n_paths, seed,
                        state: Optional[FilterState] = None, block_size=2000, workers=1) -> np.ndarray:
    """
    n_paths x horizon return paths; innovations (NIG or standard normal when
    innovation is None) are standardized to mean 0, variance 1.
    Each block of paths has its own substream, so output does not depend on workers.
    """
    if horizon < 1 or n_paths < 1:
        raise ConfigError("horizon and n_paths must be >= 1")
    state = state or steady_state(params)
    blocks = block_slices(int(n_paths), block_size)
    out = np.empty((int(n_paths), int(horizon)))

    def run(item):
        b, sl = item
        rng = substream(seed, "arma_garch_simulate", b)
        out[sl] = _simulate_block(params, innovation, int(horizon), sl.stop - sl.start, state, rng)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    else:
        for item in blocks:
            run(item)
    return out


# ------------------------------------------
# ARFIMA(1,d,1)-FIGARCH(1,d,1)
# ------------------------------------------
@dataclass(frozen=True)
class ArfimaFigarchParams(_Params):
    mu: float
    ar: float
    ma: float
    d_mean: float
    omega: float
    alpha: float
    beta: float
    d_vol: float
    truncation_lag: int = cfg.FIGARCH_TRUNCATION

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError(f"omega must be > 0 (omega={self.omega})")
        if not 0.0 <= self.d_mean < 1.0:
            raise ConfigError(f"d_mean must lie in [0, 1) (d_mean={self.d_mean})")
        if not 0.0 <= self.d_vol <= 1.0:
            raise ConfigError(f"d_vol must lie in [0, 1] (d_vol={self.d_vol})")
        if not self.beta < 1.0:
            raise ConfigError(f"beta must be < 1 (beta={self.beta})")
        if not self.alpha >= 0.0:
            raise ConfigError(f"alpha must be >= 0 (alpha={self.alpha})")
        if int(self.truncation_lag) < 50:
            raise ConfigError("truncation_lag must be >= 50")
        object.__setattr__(self, "truncation_lag", int(self.truncation_lag))
        lam = figarch_arch_weights(self)
        worst = int(np.argmin(lam[1:])) + 1
        if lam[worst] < -WEIGHT_TOL:
            bound = figarch_alpha_bound(self.beta, self.d_vol, self.truncation_lag)
            raise ConfigError(f"ARCH weights turn negative at lag {worst} (lambda={lam[worst]:.4g}); "
                              f"alpha must be <= {bound:.6g} for beta={self.beta}, d_vol={self.d_vol}")

    @property
    def garch_equivalent(self):
        """With d_vol = 0 the variance equation is GARCH(alpha, beta)"""
        return self.d_vol == 0.0

    @classmethod
    def weight_valid(cls, values):
        """
        Build from a parameter mapping, lowering alpha to the largest value whose
        ARCH weights are all >= 0 (omega, beta, d_vol kept).
        Returns (params, mapped) where mapped tells whether alpha was lowered.
        """
        values = dict(values)
        lag = int(values.get("truncation_lag", cfg.FIGARCH_TRUNCATION))
        alpha = float(values["alpha"])
        bound = figarch_alpha_bound(float(values["beta"]), float(values["d_vol"]), lag)
        mapped = alpha > bound
        if mapped:
            log.log("figarch", f"alpha={alpha} gives negative ARCH weights for beta={values['beta']}, "
                               f"d_vol={values['d_vol']}; using alpha={bound:.6g}", 'WARNING')
            values = dict(values, alpha=bound)
        return cls.from_dict(values), mapped


def figarch_arch_weights(params: ArfimaFigarchParams) -> np.ndarray:
    """
    lambda_1..lambda_M of sigma^2_t = omega/(1-beta) + sum_k lambda_k eps^2_{t-k}:
    1 - (1 - beta L)^-1 phi(L) (1 - L)^d with phi(L) = 1 - (alpha + beta) L.
    Returned with a leading zero (index = lag).
    """
    m = params.truncation_lag
    delta = fractional_diff_weights(params.d_vol, m)
    phi = params.alpha + params.beta
    c = delta.copy()
    c[1:] -= phi * delta[:-1]
    psi = signal.lfilter([1.0], [1.0, -params.beta], c)
    lam = -psi
    lam[0] = 0.0
    return lam


def figarch_alpha_bound(beta, d_vol, truncation_lag=cfg.FIGARCH_TRUNCATION) -> float:
    """
    Largest alpha >= 0 keeping lambda_1..lambda_M >= 0 at fixed beta and d_vol.

    lambda_k = a_k + alpha b_k with a = 1 - (1 - L)^d (never negative) and
    b = L (1 - beta L)^-1 (1 - L)^d, so the bound is min a_k / -b_k over b_k < 0.
    alpha = 0 is always admissible.
    """
    delta = fractional_diff_weights(d_vol, truncation_lag)
    a = -delta[1:]
    b = signal.lfilter([1.0], [1.0, -beta], delta)[:-1]
    falling = b < -WEIGHT_TOL
    if not np.any(falling):
        return math.inf
    return float(np.min(np.maximum(a[falling], 0.0) / -b[falling]))


def _figarch_backcast(residuals, params, window):
    stationary = params.d_vol == 0.0 and params.alpha + params.beta < 1.0
    unconditional = params.omega / (1.0 - params.alpha - params.beta) if stationary else None
    return _initial_variance(residuals, unconditional, window)


def figarch_variance_filter(residuals, params: ArfimaFigarchParams, init_window=cfg.INIT_VARIANCE_WINDOW,
                            weights=None) -> np.ndarray:
    """
    sigma^2_t = omega/(1-beta) + sum_{k=1}^{M} lambda_k eps^2_{t-k}; lags before
    the sample use a backcast (unconditional variance when stationary, else the
    first init_window residuals' variance). Raises if any variance is not positive.
    """
    eps = np.asarray(residuals, dtype=float).ravel()
    if eps.size < max(1, params.truncation_lag // 4):
        raise DataError(f"need at least {params.truncation_lag // 4} residuals "
                        f"for truncation lag {params.truncation_lag}")
    lam = figarch_arch_weights(params) if weights is None else weights
    backcast = _figarch_backcast(eps, params, init_window)
    n = eps.size
    observed = _causal_convolve(eps ** 2, lam)
    tail = np.cumsum(lam[::-1])[::-1]               # tail[j] = sum_{k>=j} lambda_k
    idx = np.arange(1, n + 1)
    presample = np.where(idx < lam.size, tail[np.minimum(idx, lam.size - 1)], 0.0)
    sigma2 = params.omega / (1.0 - params.beta) + observed + backcast * presample
    if np.any(sigma2 <= 0) or not np.all(np.isfinite(sigma2)):
        bad = int(np.argmax(~(sigma2 > 0)))
        raise NumericError(f"FIGARCH weights produce a non-positive variance at t={bad}")
    return sigma2


def arfima_residuals(series, params: ArfimaFigarchParams) -> np.ndarray:
    """phi(L)(1 - L)^d (x - mu) = theta(L) eps, solved for eps"""
    x = np.asarray(series, dtype=float).ravel() - params.mu
    if params.d_mean == 0.0:
        y = x
    else:
        y = _causal_convolve(x, fractional_diff_weights(params.d_mean, min(params.truncation_lag, x.size)))
    return signal.lfilter([1.0, -params.ar], [1.0, params.ma], y)


def figarch_simulate(params: ArfimaFigarchParams, n, seed, burn=500, innovation: Optional[NigParams] = None,
                     h0=None):
    """
    Simulate residuals from the FIGARCH variance equation and build returns
    through the ARFIMA mean. Returns (returns, residuals, variances).
    """
    rng = substream(seed, "figarch_simulate")
    total = int(n) + int(burn)
    lam = figarch_arch_weights(params)
    m = lam.size - 1
    z = _innovations(innovation, (total,), rng)
    const = params.omega / (1.0 - params.beta)
    backcast = h0 if h0 is not None else (
        params.omega / (1.0 - params.alpha - params.beta) if params.alpha + params.beta < 1 else const)
    history = np.full(m, backcast)                  # eps^2 at lags M..1
    eps = np.empty(total)
    var = np.empty(total)
    rev = lam[1:][::-1]
    for t in range(total):
        s2 = const + float(rev @ history)
        if s2 <= 0:
            raise NumericError(f"simulated FIGARCH variance not positive at t={t}")
        var[t] = s2
        eps[t] = math.sqrt(s2) * z[t]
        history[:-1] = history[1:]
        history[-1] = eps[t] ** 2
    eps, var = eps[burn:], var[burn:]
    # invert the mean filter: (1 - L)^d y = arma part
    u = signal.lfilter([1.0, params.ma], [1.0, -params.ar], eps)
    if params.d_mean != 0.0:
        u = _causal_convolve(u, fractional_diff_weights(-params.d_mean, min(params.truncation_lag, u.size)))
    return params.mu + u, eps, var


def _gaussian_nll(eps, var):
    return 0.5 * float(np.sum(LOG_2PI + np.log(var) + eps ** 2 / var))


@dataclass
class FitResult:
    params: object
    loglik: float
    n_obs: int
    n_free: int
    converged: bool
    iterations: int

    @property
    def aic(self):
        return 2.0 * self.n_free - 2.0 * self.loglik

    @property
    def bic(self):
        return math.log(self.n_obs) * self.n_free - 2.0 * self.loglik

    def to_dict(self):
        return {"params": self.params.to_dict(), "loglik": self.loglik, "aic": self.aic, "bic": self.bic,
                "n_obs": self.n_obs, "converged": self.converged, "iterations": self.iterations}


def _box_search(objective, x0, lower, upper, max_iter, max_restarts, restart_tol):
    """
    Nelder-Mead on a box: points outside are clamped and penalized by their
    distance. Restarts from the best point until the gain is below restart_tol.
    """
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)

    def bounded(x):
        clamped = np.clip(x, lower, upper)
        return objective(clamped) + 1e6 * float(np.sum((x - clamped) ** 2))

    best_x, best_f = np.asarray(x0, float), bounded(np.asarray(x0, float))
    converged, iterations = False, 0
    for _ in range(max_restarts):
        res = minimize(bounded, best_x, method="Nelder-Mead",
                       options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-10, "adaptive": True})
        iterations += int(res.nit)
        gain = best_f - float(res.fun)
        if float(res.fun) < best_f:
            best_x, best_f = np.clip(res.x, lower, upper), float(res.fun)
        if res.success and gain < restart_tol:
            converged = True
            break
    return best_x, best_f, converged, iterations


FIGARCH_FIELDS = ("mu", "ar", "ma", "d_mean", "omega", "alpha", "beta", "d_vol")


def _figarch_box(x):
    sd = float(np.std(x)) or 1.0
    mean = float(np.mean(x))
    var = sd ** 2
    return {
        "mu": (mean - 10 * sd, mean + 10 * sd),
        "ar": (-0.999, 0.999),
        "ma": (-0.999, 0.999),
        "d_mean": (0.0, 0.999),
        "omega": (math.log(1e-12), math.log(10.0 * var)),
        "alpha": (0.0, 2.0),
        "beta": (-0.999, 0.999),
        "d_vol": (0.0, 1.0),
    }


def figarch_start(series, truncation_lag=cfg.FIGARCH_TRUNCATION) -> ArfimaFigarchParams:
    """Neutral starting point: sample mean, no ARMA terms, moderate volatility memory"""
    x = np.asarray(series, dtype=float).ravel()
    var = float(np.var(x)) or 1e-8
    return ArfimaFigarchParams(mu=float(np.mean(x)), ar=0.0, ma=0.0, d_mean=0.0, omega=0.05 * var, alpha=0.0,
                               beta=0.3, d_vol=0.4, truncation_lag=truncation_lag)


def arfima_figarch_fit(series, init: Optional[ArfimaFigarchParams] = None, fixed: Sequence[str] = (),
                       max_iter=cfg.QMLE_MAX_ITER, max_restarts=cfg.QMLE_MAX_RESTARTS,
                       restart_tol=cfg.QMLE_RESTART_TOL, raise_on_failure=False) -> FitResult:
    """
    Gaussian quasi-maximum likelihood by Nelder-Mead from init (figarch_start
    when omitted), inside an admissible box (omega searched on a log scale).
    fixed names parameters held at their init values. Points with a negative
    ARCH weight or a non-positive variance score +inf.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < cfg.FIGARCH_MIN_OBS:
        raise DataError(f"FIGARCH fit needs at least {cfg.FIGARCH_MIN_OBS} observations, got {x.size}")
    init = init if init is not None else figarch_start(x)
    box = _figarch_box(x)
    start = {f: getattr(init, f) for f in FIGARCH_FIELDS}
    start["omega"] = math.log(init.omega)
    for name, (lo, hi) in box.items():
        if not lo <= start[name] <= hi:
            raise ConfigError(f"initial {name}={getattr(init, name)} outside the admissible box")
    unknown = set(fixed) - set(FIGARCH_FIELDS)
    if unknown:
        raise ConfigError(f"unknown fixed parameters {sorted(unknown)}")
    free = [f for f in FIGARCH_FIELDS if f not in fixed]

    def unpack(vec):
        values = dict(start)
        values.update(zip(free, vec))
        values["omega"] = math.exp(values["omega"])
        return replace(init, **values)

    def objective(vec):
        try:
            p = unpack(vec)
            eps = arfima_residuals(x, p)
            var = figarch_variance_filter(eps, p)
        except (NumericError, ConfigError):
            return 1e12
        value = _gaussian_nll(eps, var)
        return value if math.isfinite(value) else 1e12

    x0 = np.array([start[f] for f in free])
    lower = [box[f][0] for f in free]
    upper = [box[f][1] for f in free]
    best, nll, converged, iterations = _box_search(objective, x0, lower, upper, max_iter, max_restarts, restart_tol)
    result = FitResult(unpack(best), -nll, x.size, len(free), converged, iterations)
    if not converged:
        log.log("figarch", f"QMLE did not converge after {iterations} iterations (best loglik {-nll:.4f})", 'WARNING')
        if raise_on_failure:
            raise ConvergenceError("FIGARCH QMLE did not converge", best=result)
    return result


def arma_garch_fit(series, init: Optional[ArmaGarchParams] = None, max_iter=cfg.QMLE_MAX_ITER,
                   max_restarts=cfg.QMLE_MAX_RESTARTS, restart_tol=cfg.QMLE_RESTART_TOL) -> FitResult:
    """Gaussian QMLE for ARMA(1,1)-GARCH(1,1) with alpha + beta < 1"""
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 100:
        raise DataError(f"ARMA-GARCH fit needs at least 100 observations, got {x.size}")
    var = float(np.var(x)) or 1e-8
    if init is None:
        init = ArmaGarchParams(mu=float(np.mean(x)), ar=0.0, ma=0.0, omega=0.05 * var, alpha=0.05, beta=0.9)
    sd = math.sqrt(var)
    lower = [float(np.mean(x)) - 10 * sd, -0.999, -0.999, math.log(1e-14), 0.0, 0.0]
    upper = [float(np.mean(x)) + 10 * sd, 0.999, 0.999, math.log(10.0 * var), 0.999, 0.999]
    x0 = np.clip([init.mu, init.ar, init.ma, math.log(init.omega), init.alpha, init.beta], lower, upper)

    def unpack(vec):
        return ArmaGarchParams(mu=vec[0], ar=vec[1], ma=vec[2], omega=math.exp(vec[3]), alpha=vec[4], beta=vec[5])

    def objective(vec):
        if vec[4] + vec[5] >= 0.9999:
            return 1e12
        p = unpack(vec)
        eps = arma_residuals(x, p.mu, p.ar, p.ma)
        h = np.empty_like(eps)
        h[0] = p.unconditional_variance
        h[1:] = signal.lfilter([1.0], [1.0, -p.beta], p.omega + p.alpha * eps[:-1] ** 2, zi=[p.beta * h[0]])[0]
        if np.any(h <= 0):
            return 1e12
        value = _gaussian_nll(eps, h)
        return value if math.isfinite(value) else 1e12

    best, nll, converged, iterations = _box_search(objective, x0, lower, upper, max_iter, max_restarts, restart_tol)
    if not converged:
        log.log("garch", f"QMLE did not converge after {iterations} iterations", 'WARNING')
    return FitResult(unpack(best), -nll, x.size, 6, converged, iterations)


# ------------------------------------------
# GJR STATE RECURSION (dynamic program)
# ------------------------------------------
@dataclass(frozen=True)
class GjrStateParams(_Params):
    omega: float
    beta: float
    alpha: float
    leverage: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError(f"omega must be > 0 (omega={self.omega})")
        if self.alpha < 0 or self.leverage < 0:
            raise ConfigError("alpha and leverage must be >= 0")
        if self.beta < 0:
            log.log("gjr", f"beta={self.beta} < 0: positivity relies on the variance floor", 'WARNING')

    @property
    def persistence(self):
        return self.alpha + self.beta + 0.5 * self.leverage

    @property
    def reference_variance(self):
        """omega / (1 - alpha - beta - l/2) when finite, else omega / (1 - beta)"""
        if self.persistence < 1.0:
            return self.omega / (1.0 - self.persistence)
        if self.beta < 1.0:
            return self.omega / (1.0 - self.beta)
        return self.omega


def gjr_state_step(h, z, params: GjrStateParams, floor=None):
    """h' = omega + beta h + (alpha + l 1{z<0}) h z^2 (broadcasts over h and z)"""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr <= 0):
        raise NumericError("variance must be > 0")
    z_arr = np.asarray(z, dtype=float)
    arch = params.alpha + params.leverage * (z_arr < 0)
    out = params.omega + params.beta * h_arr + arch * h_arr * z_arr ** 2
    if floor is not None:
        out = np.maximum(out, floor)
    elif np.any(out <= 0):
        raise NumericError("GJR step produced a non-positive variance; pass a floor")
    if np.ndim(out) == 0:
        return float(out)
    return out


# ------------------------------------------
# FORWARD-LOOKING RATIOS
# ------------------------------------------
def forward_ratio_series(series, spec, params: ArmaGarchParams, innovation: Optional[NigParams], window,
                         n_scenarios, seed, stride=1, dates=None):
    """
    At each date t >= window-1 (every stride), the ratio of n_scenarios
    one-step-ahead returns simulated from the filter state at t.
    """
    x = np.asarray(series, dtype=float).ravel()
    if window > x.size:
        raise DataError(f"window {window} exceeds series length {x.size}")
    filtered = arma_garch_filter(x, params)
    eps, h = filtered.residuals, filtered.variances
    ends = np.arange(window - 1, x.size, max(1, int(stride)))
    values = []
    for t in ends:
        h_next = params.omega + params.alpha * eps[t] ** 2 + params.beta * h[t]
        mean = params.mu + params.ar * (x[t] - params.mu) + params.ma * eps[t]
        rng = substream(seed, "forward_ratio", int(t))
        draws = mean + math.sqrt(h_next) * _innovations(innovation, (int(n_scenarios),), rng)
        values.append(ratio(draws, spec))
    index = pd.Index(dates)[ends] if dates is not None else pd.Index(ends)
    return pd.Series(values, index=index, name=f"forward {spec.label}", dtype=float)
