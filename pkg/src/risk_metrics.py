"""
Empirical VaR/AVaR, reward-risk ratios (Sharpe, STARR, Rachev, CVaR ratio)
and randomized axiom checks
"""
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np
import pandas as pd

import config as cfg
from src.data_model import is_degenerate_variance
from src.exceptions import ConfigError, DataError, ZeroVarianceError
from src.seeding import substream


class RatioKind(Enum):
    SHARPE = "Sharpe"
    STARR = "STARR"
    RACHEV = "Rachev"
    CVAR = "CVaR"
    CUMULATIVE = "Cumulative Return"


@dataclass(frozen=True)
class ConfidenceLevel:
    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not (0.0 < g <= 1.0) or math.isnan(g):
            raise ConfigError(f"confidence level must lie in (0, 1], got {self.gamma}")
        object.__setattr__(self, "gamma", g)


def _gamma(value):
    return value.gamma if isinstance(value, ConfidenceLevel) else ConfidenceLevel(value).gamma


@dataclass(frozen=True)
class RatioSpec:
    """
    Args:
        kind: Which ratio
        level_gamma: Confidence level of the loss tail (tail probability = 1 - level)
        level_beta: Confidence level of the gain tail (Rachev only)
        clip_reward: Apply the positive part to the numerator
    """
    kind: RatioKind
    level_gamma: Optional[float] = None
    level_beta: Optional[float] = None
    clip_reward: bool = False

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, RatioKind) else RatioKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (RatioKind.SHARPE, RatioKind.CUMULATIVE):
            object.__setattr__(self, "level_gamma", None)
            object.__setattr__(self, "level_beta", None)
            return
        if self.level_gamma is None:
            raise ConfigError(f"{kind.value} needs a confidence level")
        object.__setattr__(self, "level_gamma", _level(self.level_gamma))
        if kind is RatioKind.RACHEV:
            if self.level_beta is None:
                raise ConfigError("Rachev needs both confidence levels")
            object.__setattr__(self, "level_beta", _level(self.level_beta))
        else:
            object.__setattr__(self, "level_beta", None)

    @property
    def label(self):
        if self.level_gamma is None:
            return self.kind.value
        if self.kind is RatioKind.RACHEV:
            return f"Rachev({self.level_beta:g},{self.level_gamma:g})"
        return f"{self.kind.value}({self.level_gamma:g})"

    @property
    def scale_invariant(self):
        return self.kind is not RatioKind.CUMULATIVE

    @classmethod
    def parse(cls, text, clip_reward=False):
        """Parse labels such as "Sharpe", "STARR(0.99)", "Rachev(0.95,0.95)" """
        text = text.strip()
        match = re.fullmatch(r"([A-Za-z ]+?)\s*(?:\(([^)]*)\))?", text)
        if not match:
            raise ConfigError(f"cannot parse ratio spec {text!r}")
        name, args = match.group(1).strip(), match.group(2)
        kinds = {k.value.lower(): k for k in RatioKind}
        kinds["cvar ratio"] = RatioKind.CVAR
        kinds["cumulative"] = RatioKind.CUMULATIVE
        if name.lower() not in kinds:
            raise ConfigError(f"unknown ratio kind {name!r}")
        kind = kinds[name.lower()]
        levels = [float(a) for a in args.split(",")] if args else []
        if kind is RatioKind.RACHEV:
            if len(levels) == 1:
                levels = levels * 2
            if len(levels) != 2:
                raise ConfigError(f"Rachev needs two levels: {text!r}")
            return cls(kind, level_gamma=levels[1], level_beta=levels[0], clip_reward=clip_reward)
        if kind in (RatioKind.SHARPE, RatioKind.CUMULATIVE):
            return cls(kind, clip_reward=clip_reward)
        if len(levels) != 1:
            raise ConfigError(f"{kind.value} needs one level: {text!r}")
        return cls(kind, level_gamma=levels[0], clip_reward=clip_reward)

    def to_dict(self):
        return {"kind": self.kind.value, "level_gamma": self.level_gamma,
                "level_beta": self.level_beta, "clip_reward": self.clip_reward}

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, str):
            return cls.parse(data)
        try:
            return cls(RatioKind(data["kind"]), data.get("level_gamma"), data.get("level_beta"),
                       bool(data.get("clip_reward", False)))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"invalid ratio spec {data!r}: {e}")


def _level(value):
    v = float(value)
    if not (0.0 <= v < 1.0):
        raise ConfigError(f"ratio confidence level must lie in [0, 1), got {value}")
    return v


def _sample(sample, min_length=1):
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < min_length:
        raise DataError("empty sample" if min_length == 1 else f"sample needs at least {min_length} points")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite values in sample")
    return x


# ------------------------------------------
# VaR / AVaR
# ------------------------------------------
def var_empirical(sample, gamma) -> float:
    """
    Smallest m with #{x : x + m < 0} / n <= gamma (positive = loss).
    gamma is the tail probability.
    """
    x = np.sort(_sample(sample))
    g = _gamma(gamma)
    n = x.size
    k = math.ceil(g * n - 1e-12)
    k = min(max(k, 1), n)
    return float(-x[k - 1])


def avar_empirical(sample, gamma) -> float:
    """
    gamma^-1 * integral_0^gamma VaR_u du on the empirical distribution:
    the average of the worst floor(g*n) outcomes plus the fractional slice
    of the next one.
    """
    x = np.sort(_sample(sample))
    g = _gamma(gamma)
    n = x.size
    mass = g * n
    k = min(int(math.floor(mass + 1e-12)), n)
    frac = mass - k
    if frac < 1e-12:
        frac = 0.0
    tail = float(np.sum(x[:k]))
    if frac > 0.0 and k < n:
        tail += frac * x[k]
    return float(-tail / mass)


def _tail(level):
    return 1.0 - level


# ------------------------------------------
# RATIOS
# ------------------------------------------
def _divide(numerator, denominator):
    if denominator <= 0.0:
        return math.inf
    return numerator / denominator


def sharpe_ratio(x, clip_reward=False):
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1))
    if is_degenerate_variance(var, mean):
        raise ZeroVarianceError("zero variance: Sharpe ratio undefined")
    reward = max(mean, 0.0) if clip_reward else mean
    return reward / math.sqrt(var)


def starr_ratio(x, level, clip_reward=False):
    mean = float(np.mean(x))
    reward = max(mean, 0.0) if clip_reward else mean
    return _divide(reward, max(avar_empirical(x, _tail(level)), 0.0))


def rachev_ratio(x, level_beta, level_gamma):
    gain = avar_empirical(-x, _tail(level_beta))
    loss = avar_empirical(x, _tail(level_gamma))
    return _divide(gain, loss)


def cvar_ratio(x, level, clip_reward=False):
    """
    E[X | X <= -VaR] over VaR+, with VaR at tail 1 - level. VaR is quoted as a
    positive loss, so the conditioning set is the outcomes at or below -VaR.
    """
    var = var_empirical(x, _tail(level))
    below = x[x <= -var]
    conditional = float(below.mean()) if below.size else float(np.min(x))
    reward = max(conditional, 0.0) if clip_reward else conditional
    return _divide(reward, max(var, 0.0))


def cumulative_return(x):
    return float(np.prod(1.0 + x) - 1.0)


def ratio(sample, spec: RatioSpec) -> float:
    """Score of one return series under spec; a nonpositive risk denominator gives +inf"""
    x = _sample(sample, min_length=2)
    kind = spec.kind
    if kind is RatioKind.SHARPE:
        return sharpe_ratio(x, spec.clip_reward)
    if kind is RatioKind.STARR:
        return starr_ratio(x, spec.level_gamma, spec.clip_reward)
    if kind is RatioKind.RACHEV:
        return rachev_ratio(x, spec.level_beta, spec.level_gamma)
    if kind is RatioKind.CVAR:
        return cvar_ratio(x, spec.level_gamma, spec.clip_reward)
    return cumulative_return(x)


def ratio_scores(window, spec: RatioSpec) -> np.ndarray:
    """
    Row-wise ratio of an N x L window. A constant row scores sign(mean) * inf
    (0 when flat at zero) instead of failing.
    """
    m = np.atleast_2d(np.asarray(window, dtype=float))
    if m.shape[1] < 2:
        raise DataError("ranking window needs at least 2 dates")
    scores = np.empty(m.shape[0])
    for i, row in enumerate(m):
        try:
            scores[i] = ratio(row, spec)
        except ZeroVarianceError:
            scores[i] = math.copysign(math.inf, row.mean()) if row.mean() != 0.0 else 0.0
    return scores


def rolling_ratio(series, spec: RatioSpec, window: int, dates=None):
    """
    Score on each trailing window; one value per date from index window-1 on

    Returns:
        pd.Series indexed by the window end date (or position)
    """
    x = _sample(series)
    window = int(window)
    if window < 2:
        raise ConfigError("rolling window must be at least 2")
    if window > x.size:
        raise DataError(f"window {window} exceeds series length {x.size}")
    ends = np.arange(window - 1, x.size)
    values = [ratio(x[e - window + 1:e + 1], spec) for e in ends]
    index = pd.Index(dates)[ends] if dates is not None else pd.Index(ends)
    return pd.Series(values, index=index, name=spec.label, dtype=float)


def rolling_frame(scores: Dict[str, pd.Series], spec: RatioSpec):
    """Long-format CSV rows: date, ratio_kind, level(s), value"""
    rows = []
    for name, s in scores.items():
        for date, value in s.items():
            rows.append({"date": date, "series": name, "ratio_kind": spec.kind.value,
                         "level_beta": spec.level_beta, "level_gamma": spec.level_gamma,
                         "value": value})
    return pd.DataFrame(rows, columns=["date", "series", "ratio_kind", "level_beta", "level_gamma", "value"])


# ------------------------------------------
# AXIOMS
# ------------------------------------------
AXIOMS = ("monotonicity", "quasi_concavity", "scale_invariance", "distribution_based")


@dataclass
class AxiomReport:
    spec: RatioSpec
    trials: int
    passes: Dict[str, int]
    failures: Dict[str, int]
    skipped: Dict[str, int]

    def all_pass(self, axioms=AXIOMS):
        return all(self.failures[a] == 0 for a in axioms)

    def to_frame(self):
        return pd.DataFrame(
            {"passes": self.passes, "failures": self.failures, "skipped": self.skipped}
        ).loc[list(AXIOMS)]


def _at_least(a, b, slack):
    """a >= b up to a relative slack; inf handled exactly"""
    if math.isinf(b) and b > 0:
        return math.isinf(a) and a > 0
    if math.isinf(a) and a > 0:
        return True
    return a >= b - slack * max(1.0, abs(a), abs(b))


def _close(a, b, slack):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= slack * max(1.0, abs(a), abs(b))


def _draw_sample(rng, n):
    # fat-tailed, randomly located and scaled
    df = rng.uniform(2.5, 8.0)
    loc = rng.normal(0.0, 0.01)
    scale = rng.uniform(0.005, 0.03)
    return loc + scale * rng.standard_t(df, size=n)


def axiom_suite(spec: RatioSpec, trials=cfg.AXIOM_TRIALS, seed=0, n=cfg.AXIOM_SAMPLE_SIZE,
                slack=cfg.AXIOM_SLACK) -> AxiomReport:
    """
    Randomized paired-sample checks of monotonicity, quasi-concavity,
    scale invariance and permutation (distribution) invariance.
    Trials where a score is undefined are counted as skipped.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = substream(seed, f"axiom_suite/{spec.label}")
    passes = {a: 0 for a in AXIOMS}
    failures = {a: 0 for a in AXIOMS}
    skipped = {a: 0 for a in AXIOMS}

    def check(axiom, fn):
        try:
            ok = fn()
        except DataError:
            skipped[axiom] += 1
            return
        if ok:
            passes[axiom] += 1
        else:
            failures[axiom] += 1

    for _ in range(int(trials)):
        x = _draw_sample(rng, n)
        y = _draw_sample(rng, n)
        dominated = x - np.abs(rng.normal(0.0, 0.005, size=n)) * rng.integers(0, 2, size=n)
        lam = rng.uniform(0.0, 1.0)
        c = rng.uniform(0.1, 10.0)
        perm = rng.permutation(n)

        check("monotonicity", lambda: _at_least(ratio(x, spec), ratio(dominated, spec), slack))
        check("quasi_concavity", lambda: _at_least(
            ratio(lam * x + (1.0 - lam) * y, spec), min(ratio(x, spec), ratio(y, spec)), slack))
        check("scale_invariance", lambda: _close(ratio(c * x, spec), ratio(x, spec), slack))
        check("distribution_based", lambda: _close(ratio(x[perm], spec), ratio(x, spec), slack))

    return AxiomReport(spec, int(trials), passes, failures, skipped)
