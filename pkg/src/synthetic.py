"""
Synthetic regime-switching panels: r = lambda(D) h + sqrt(h) z with a GJR
variance state per asset, a shared two-state regime and a common factor
"""
import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.data_model import PricePanel, ReturnPanel, compound_prices, to_arithmetic_returns, write_panel_csv
from src.exceptions import ConfigError, NumericError
from src.logger_utils import ColoredLogger as log
from src.regime_model import (RegimePath, RegimePricing, TransitionMatrix, bundled_state, load_bundled_parameters,
                              load_bundled_transitions, simulate_chain, write_regime_labels)
from src.seeding import substream
from src.vol_models import GjrStateParams, gjr_state_step


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Args:
        n_assets: Panel width
        horizon: Number of return dates
        state: Variance recursion shared by every asset (each asset has its own path)
        pricing: Regime price of risk
        transition: Regime chain
        factor_share: Share of shock variance from the common factor
        start: First price date
        d0: Initial regime
        span: Variance paths are clamped to [h_ref / span, h_ref * span]
    """
    n_assets: int
    horizon: int
    state: GjrStateParams
    pricing: RegimePricing
    transition: TransitionMatrix
    factor_share: float = 0.5
    start: str = "2017-01-02"
    d0: int = 0
    span: float = 50.0

    def __post_init__(self):
        if self.n_assets < 1 or self.horizon < 2:
            raise ConfigError("synthetic panel needs >= 1 asset and >= 2 dates")
        if not 0.0 <= self.factor_share <= 1.0:
            raise ConfigError(f"factor share must lie in [0, 1], got {self.factor_share}")
        if self.d0 not in (0, 1):
            raise ConfigError("initial regime must be 0 or 1")

    @classmethod
    def from_bundled(cls, leg="momentum", n_assets=12, horizon=1000, leverage=0.0, **kwargs):
        """Spec built from the bundled parameter table and transition matrix of one leg"""
        params, matrices = load_bundled_parameters(), load_bundled_transitions()
        if leg not in params or leg not in matrices:
            raise ConfigError(f"no bundled parameters for leg {leg!r}")
        state = bundled_state(params[leg], leverage)
        return cls(n_assets, horizon, state, params[leg]["pricing"], matrices[leg], **kwargs)


@dataclass(frozen=True)
class SyntheticData:
    prices: PricePanel
    returns: ReturnPanel
    regimes: RegimePath
    variances: np.ndarray       # N x T, variance used for each return


def generate_synthetic(spec: SyntheticSpec, seed) -> SyntheticData:
    """Regime path, per-asset variance paths and returns; prices compound from 100"""
    n, horizon = int(spec.n_assets), int(spec.horizon)
    regimes = simulate_chain(spec.transition, spec.d0, horizon, substream(seed, "synthetic/regimes"))
    rng = substream(seed, "synthetic/shocks")
    common = rng.standard_normal(horizon)
    own = rng.standard_normal((n, horizon))
    rho = spec.factor_share
    z = math.sqrt(rho) * common[None, :] + math.sqrt(1.0 - rho) * own

    h_ref = spec.state.reference_variance
    h_lo, h_hi = h_ref / spec.span, h_ref * spec.span
    lam = np.array([spec.pricing.lambda0, spec.pricing.lambda0 + spec.pricing.lambda1])[regimes.states]
    h = np.empty((n, horizon))
    current = np.full(n, h_ref)
    for t in range(horizon):
        h[:, t] = current
        current = np.clip(gjr_state_step(current, z[:, t], spec.state, floor=h_lo), h_lo, h_hi)
    returns = lam[None, :] * h + np.sqrt(h) * z
    if np.any(returns <= -1.0):
        raise NumericError("synthetic return at or below -100%; reduce the variance span")

    dates = pd.bdate_range(spec.start, periods=horizon + 1)
    ids = [f"S{i + 1:02d}" for i in range(n)]
    prices = PricePanel(dates, compound_prices(returns, np.full(n, 100.0)), ids)
    panel = to_arithmetic_returns(prices)
    log.log("synthetic", f"Generated {n} assets x {horizon} dates "
                         f"(regime-1 share {float(regimes.states.mean()):.3f})", 'SUCCESS')
    return SyntheticData(prices, panel, RegimePath(regimes.states, panel.dates), h)


def write_synthetic(data: SyntheticData, out_dir):
    """prices.csv, returns.csv and regimes.csv"""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "prices": os.path.join(out_dir, "prices.csv"),
        "returns": os.path.join(out_dir, "returns.csv"),
        "regimes": os.path.join(out_dir, "regimes.csv"),
    }
    write_panel_csv(data.prices, paths["prices"])
    write_panel_csv(data.returns, paths["returns"])
    write_regime_labels(data.regimes, paths["regimes"])
    return paths
