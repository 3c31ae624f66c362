"""
PCA factor model: eigendecomposition of the sample covariance, factor scores
and the one-step composite forecast r_hat = F @ w
"""
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.data_model import ReturnPanel
from src.exceptions import ConfigError, DataError
from src.logger_utils import ColoredLogger as log


@dataclass(frozen=True)
class FactorModel:
    means: np.ndarray           # N
    loadings: np.ndarray        # N x K, orthonormal columns
    eigenvalues: np.ndarray     # K, descending
    asset_ids: tuple = ()
    scales: np.ndarray = None   # per-asset std when fitted on correlations
    total_variance: float = None

    @property
    def k(self):
        return self.loadings.shape[1]

    def to_json(self):
        payload = {
            "means": self.means.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "loadings": self.loadings.tolist(),
            "asset_ids": list(self.asset_ids),
            "scales": None if self.scales is None else self.scales.tolist(),
            "total_variance": self.total_variance,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        scales = data.get("scales")
        return cls(
            means=np.asarray(data["means"], dtype=float),
            loadings=np.asarray(data["loadings"], dtype=float).reshape(len(data["means"]), -1),
            eigenvalues=np.asarray(data["eigenvalues"], dtype=float),
            asset_ids=tuple(data.get("asset_ids", ())),
            scales=None if scales is None else np.asarray(scales, dtype=float),
            total_variance=data.get("total_variance"),
        )

    def reconstruct(self, scores):
        """Map T x K scores back to N x T returns"""
        scores = np.asarray(scores, dtype=float)
        centered = self.loadings @ scores.T
        if self.scales is not None:
            centered = centered * self.scales[:, None]
        return centered + self.means[:, None]


@dataclass(frozen=True)
class FactorScores:
    scores: np.ndarray          # T x K
    normalized: bool
    dates: pd.DatetimeIndex = None


def fit_pca(panel: ReturnPanel, k: int, correlation=False) -> FactorModel:
    """
    Eigendecomposition of the sample covariance (or correlation) of the panel.
    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    n, t = panel.returns.shape
    if t < 2:
        raise DataError("PCA needs at least two dates")
    k = int(k)
    if not 1 <= k <= n:
        raise ConfigError(f"component count {k} outside [1, {n}]")
    if t <= n:
        log.log("pca", f"T={t} <= N={n}: covariance is rank deficient", 'WARNING')

    x = panel.returns
    means = x.mean(axis=1)
    centered = x - means[:, None]
    scales = None
    if correlation:
        scales = centered.std(axis=1, ddof=1)
        if np.any(scales <= 0):
            raise DataError("correlation PCA needs every asset to vary")
        centered = centered / scales[:, None]
    cov = centered @ centered.T / (t - 1)

    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order]

    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(n)])
    signs[signs == 0] = 1.0
    vectors = vectors * signs

    return FactorModel(
        means=means,
        loadings=vectors[:, :k].copy(),
        eigenvalues=values[:k].copy(),
        asset_ids=tuple(panel.asset_ids),
        scales=scales,
        total_variance=float(np.trace(cov)),
    )


def explained_variance(model: FactorModel) -> pd.DataFrame:
    """Per-component share of total variance and the cumulative share"""
    total = model.total_variance if model.total_variance else float(model.eigenvalues.sum())
    shares = model.eigenvalues / total if total > 0 else np.zeros_like(model.eigenvalues)
    cumulative = np.minimum(np.cumsum(shares), 1.0)
    return pd.DataFrame({
        "component": np.arange(1, model.k + 1),
        "eigenvalue": model.eigenvalues,
        "share": shares,
        "cumulative": cumulative,
    })


def project_scores(model: FactorModel, panel: ReturnPanel, normalize=False) -> FactorScores:
    """f_t = P'(r_t - r_bar), optionally standardized per column (ddof=1)"""
    if panel.n_assets != model.means.size:
        raise DataError(f"panel has {panel.n_assets} assets, model expects {model.means.size}")
    if model.asset_ids and tuple(panel.asset_ids) != tuple(model.asset_ids):
        raise DataError("panel asset ids do not match the fitted model")
    centered = panel.returns - model.means[:, None]
    if model.scales is not None:
        centered = centered / model.scales[:, None]
    scores = centered.T @ model.loadings
    if normalize:
        if scores.shape[0] < 2:
            raise DataError("normalizing scores needs at least two dates")
        mu = scores.mean(axis=0)
        sd = scores.std(axis=0, ddof=1)
        if np.any(sd <= 0):
            raise DataError("a factor score column has zero variance")
        scores = (scores - mu) / sd
    return FactorScores(scores, bool(normalize), panel.dates)


def forecast_portfolio_return(scores_window, weights) -> np.ndarray:
    """Row-wise inner product F_t w"""
    f = np.atleast_2d(np.asarray(scores_window, dtype=float))
    w = np.asarray(weights, dtype=float).ravel()
    if f.shape[1] != w.size:
        raise DataError(f"weights have length {w.size}, scores have {f.shape[1]} columns")
    return f @ w


def scores_to_panel(scores: FactorScores, prefix="F", scale=None) -> ReturnPanel:
    """
    Factor-score portfolios as a rankable panel (F01, F02, ...).

    scale maps scores to return magnitudes (returns must stay above -1);
    by default unnormalized scores are used as-is.
    """
    values = scores.scores.T.copy()
    if scale is not None:
        values = values * float(scale)
    ids = [f"{prefix}{i + 1:02d}" for i in range(values.shape[0])]
    return ReturnPanel(scores.dates, values, ids)
