"""
Two-state Markov regime: transition counting, stationary law, chain simulation,
2-state Gaussian HMM (Baum-Welch + Viterbi) and the regime price of risk
"""
import json
import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from scipy.stats import norm

from src.exceptions import ConfigError, DataError
from src.logger_utils import ColoredLogger as log
from src.seeding import substream
from src.vol_models import ArfimaFigarchParams, GjrStateParams

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


@dataclass(frozen=True)
class TransitionMatrix:
    p: np.ndarray       # 2 x 2, rows = current state

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2):
            raise ConfigError(f"transition matrix must be 2x2, got {p.shape}")
        if np.any(p < 0) or np.any(p > 1):
            raise ConfigError("transition probabilities must lie in [0, 1]")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigError(f"transition rows must sum to 1, got {p.sum(axis=1)}")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_persistence(cls, p00, p11):
        return cls(np.array([[p00, 1.0 - p00], [1.0 - p11, p11]]))

    def to_list(self):
        return self.p.tolist()

    def sojourn_means(self):
        """Expected consecutive steps spent in each state"""
        stay = np.diag(self.p)
        return tuple(float(1.0 / (1.0 - s)) if s < 1.0 else float("inf") for s in stay)


@dataclass(frozen=True)
class RegimePath:
    states: np.ndarray
    dates: Optional[pd.DatetimeIndex] = None

    def __post_init__(self):
        s = np.asarray(self.states)
        if s.ndim != 1 or not np.all(np.isin(s, (0, 1))):
            raise DataError("regime states must be 0 or 1")
        s = s.astype(np.int8)
        s.setflags(write=False)
        object.__setattr__(self, "states", s)
        if self.dates is not None and len(self.dates) != s.size:
            raise DataError("regime dates and states differ in length")

    def __len__(self):
        return self.states.size


@dataclass(frozen=True)
class RegimePricing:
    lambda0: float
    lambda1: float

    def __post_init__(self):
        if not (np.isfinite(self.lambda0) and np.isfinite(self.lambda1)):
            raise ConfigError("price of risk must be finite")


def price_of_risk(pricing: RegimePricing, d) -> float:
    """lambda(d) = lambda0 + lambda1 d"""
    if d not in (0, 1):
        raise ConfigError(f"state must be 0 or 1, got {d}")
    return pricing.lambda0 + pricing.lambda1 * d


# ------------------------------------------
# ESTIMATION FROM LABELS
# ------------------------------------------
def transition_counts(path: RegimePath):
    s = path.states.astype(int)
    counts = np.zeros((2, 2))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    return counts


def estimate_transitions(path: RegimePath, smoothing=False) -> TransitionMatrix:
    """Maximum-likelihood p_ij = n_ij / sum_j n_ij, optional add-one prior"""
    if len(path) < 2:
        raise DataError("need at least two regime observations")
    counts = transition_counts(path)
    if smoothing:
        counts = counts + 1.0
    rows = counts.sum(axis=1)
    for i in (0, 1):
        if rows[i] == 0:
            raise DataError(f"state {i} never occurs as a source; enable smoothing")
    return TransitionMatrix(counts / rows[:, None])


def stationary_distribution(tm: TransitionMatrix):
    """
    Returns:
        (pi, unique): pi solves pi P = pi; unique is False when both states absorb
    """
    p01, p10 = tm.p[0, 1], tm.p[1, 0]
    if p01 + p10 == 0.0:
        return np.array([0.5, 0.5]), False
    return np.array([p10, p01]) / (p01 + p10), True


def simulate_chain(tm: TransitionMatrix, d0, n, seed) -> RegimePath:
    """n states starting with d0; next state is 1 when u < p[d, 1]"""
    if d0 not in (0, 1):
        raise ConfigError(f"initial state must be 0 or 1, got {d0}")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "simulate_chain")
    u = rng.random(int(n))
    states = np.empty(int(n), dtype=np.int8)
    d = int(d0)
    up = tm.p[:, 1]
    for t in range(int(n)):
        states[t] = d
        d = 1 if u[t] < up[d] else 0
    return RegimePath(states)


# ------------------------------------------
# GAUSSIAN HMM
# ------------------------------------------
@dataclass(frozen=True)
class GaussianEmission:
    means: np.ndarray
    variances: np.ndarray

    def to_dict(self):
        return {"means": self.means.tolist(), "variances": self.variances.tolist()}


@dataclass
class HmmFit:
    transitions: TransitionMatrix
    emissions: GaussianEmission
    initial: np.ndarray
    smoothed: np.ndarray            # T x 2 posterior state probabilities
    viterbi: RegimePath
    loglik_history: List[float]
    converged: bool
    identifiable: bool

    @property
    def loglik(self):
        return self.loglik_history[-1]

    def summary(self):
        return {
            "transition": self.transitions.to_list(),
            "emissions": self.emissions.to_dict(),
            "initial": self.initial.tolist(),
            "loglik": self.loglik,
            "iterations": len(self.loglik_history),
            "converged": self.converged,
            "identifiable": self.identifiable,
        }


def _log_emission(x, em):
    return norm.logpdf(x[:, None], loc=em.means[None, :], scale=np.sqrt(em.variances)[None, :])


def _forward_backward(log_b, log_p, log_pi):
    t_len = log_b.shape[0]
    log_alpha = np.empty_like(log_b)
    log_alpha[0] = log_pi + log_b[0]
    for t in range(1, t_len):
        log_alpha[t] = log_b[t] + logsumexp(log_alpha[t - 1][:, None] + log_p, axis=0)
    loglik = float(logsumexp(log_alpha[-1]))
    log_beta = np.zeros_like(log_b)
    for t in range(t_len - 2, -1, -1):
        log_beta[t] = logsumexp(log_p + (log_b[t + 1] + log_beta[t + 1])[None, :], axis=1)
    log_gamma = log_alpha + log_beta - loglik
    log_xi = (log_alpha[:-1, :, None] + log_p[None, :, :]
              + (log_b[1:] + log_beta[1:])[:, None, :] - loglik)
    return loglik, np.exp(log_gamma), np.exp(log_xi)


def viterbi_path(log_b, log_p, log_pi):
    t_len = log_b.shape[0]
    delta = log_pi + log_b[0]
    back = np.zeros((t_len, 2), dtype=np.int8)
    for t in range(1, t_len):
        scores = delta[:, None] + log_p
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], [0, 1]] + log_b[t]
    states = np.empty(t_len, dtype=np.int8)
    states[-1] = int(np.argmax(delta))
    for t in range(t_len - 1, 0, -1):
        states[t - 1] = back[t, states[t]]
    return states


def _safe_log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def hmm_fit(series, init_emission: Optional[GaussianEmission] = None,
            init_transition: Optional[TransitionMatrix] = None,
            max_iter=500, tol=1e-8, variance_floor=1e-10, dates=None) -> HmmFit:
    """
    Baum-Welch on a 2-state Gaussian HMM (log-space recursions), Viterbi decoding.
    States are ordered so that state 0 has the lower mean.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 100:
        raise DataError(f"HMM fit needs at least 100 observations, got {x.size}")
    if init_emission is None:
        lo, hi = np.quantile(x, [0.25, 0.75])
        v = float(np.var(x))
        init_emission = GaussianEmission(np.array([lo, hi]), np.array([v, v]))
    if init_transition is None:
        init_transition = TransitionMatrix(np.array([[0.9, 0.1], [0.1, 0.9]]))

    em = GaussianEmission(np.asarray(init_emission.means, float).copy(),
                          np.maximum(np.asarray(init_emission.variances, float), variance_floor))
    p = np.asarray(init_transition.p).copy()
    pi0 = np.array([0.5, 0.5])
    history, converged = [], False
    gamma = None
    for _ in range(int(max_iter)):
        log_b = _log_emission(x, em)
        loglik, gamma, xi = _forward_backward(log_b, _safe_log(p), _safe_log(pi0))
        history.append(loglik)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break
        # M-step
        pi0 = gamma[0] / gamma[0].sum()
        trans = xi.sum(axis=0)
        p = trans / trans.sum(axis=1, keepdims=True)
        weight = gamma.sum(axis=0)
        means = (gamma * x[:, None]).sum(axis=0) / weight
        variances = (gamma * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / weight
        em = GaussianEmission(means, np.maximum(variances, variance_floor))

    if not converged:
        log.log("regimes", f"HMM did not converge in {max_iter} iterations", 'WARNING')

    order = np.argsort(em.means)
    em = GaussianEmission(em.means[order], em.variances[order])
    p = p[np.ix_(order, order)]
    p = p / p.sum(axis=1, keepdims=True)
    pi0 = pi0[order]
    gamma = gamma[:, order]

    scale = max(float(np.sqrt(em.variances.max())), 1e-300)
    identifiable = not (abs(em.means[1] - em.means[0]) < 1e-6 * scale
                        and abs(em.variances[1] - em.variances[0]) < 1e-6 * em.variances.max())
    if not identifiable:
        log.log("regimes", "HMM states have identical emissions (not identifiable)", 'WARNING')

    states = viterbi_path(_log_emission(x, em), _safe_log(p), _safe_log(pi0))
    return HmmFit(TransitionMatrix(p), em, pi0, gamma, RegimePath(states, dates), history, converged, identifiable)


# ------------------------------------------
# FILES AND FIXTURES
# ------------------------------------------
def load_regime_labels(path) -> RegimePath:
    """CSV of (date, state) rows"""
    if not os.path.exists(path):
        raise DataError(f"File not found: {path}")
    frame = pd.read_csv(path)
    if frame.shape[1] < 2:
        raise DataError(f"{path}: expected date and state columns")
    try:
        dates = pd.DatetimeIndex(pd.to_datetime(frame.iloc[:, 0].astype(str), format="ISO8601"))
    except (ValueError, TypeError) as e:
        raise DataError(f"{path}: malformed date ({e})")
    states = pd.to_numeric(frame.iloc[:, 1], errors="coerce")
    if states.isna().any():
        raise DataError(f"{path}: non-numeric regime state")
    order = np.argsort(dates.values, kind="stable")
    return RegimePath(states.to_numpy()[order].astype(int), dates[order])


def write_regime_labels(path_obj: RegimePath, path):
    frame = pd.DataFrame({"date": path_obj.dates.strftime("%Y-%m-%d"), "state": path_obj.states.astype(int)})
    frame.to_csv(path, index=False)


def _load_fixture(name):
    with open(os.path.join(FIXTURE_DIR, name), "r", encoding="utf-8") as f:
        return json.load(f)


def load_bundled_transitions():
    """{'winners': TransitionMatrix, 'losers': ..., 'momentum': ...}"""
    data = _load_fixture("transition_matrices.json")
    return {leg: TransitionMatrix(np.asarray(entry["p"], dtype=float))
            for leg, entry in data.items() if not leg.startswith("_")}


def load_bundled_parameters():
    """
    Per-leg ARFIMA-FIGARCH parameters and regime pricing from the bundled table.

    "table" keeps the published values; "model" is their weight-valid form
    (alpha lowered until every ARCH weight is >= 0) and "mapped" flags legs
    where that changed alpha.
    """
    data = _load_fixture("model_parameters.json")
    out = {}
    for leg, entry in data.items():
        if leg.startswith("_"):
            continue
        model, mapped = ArfimaFigarchParams.weight_valid(entry["model"])
        out[leg] = {
            "model": model,
            "table": dict(entry["model"]),
            "mapped": mapped,
            "pricing": RegimePricing(**entry["pricing"]),
        }
    return out


def bundled_state(entry, leverage=0.0) -> GjrStateParams:
    """GJR state recursion from a bundled leg's published omega, beta and alpha"""
    table = entry["table"]
    return GjrStateParams(omega=table["omega"], beta=table["beta"], alpha=table["alpha"], leverage=leverage)
