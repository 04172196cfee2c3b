"""Per-filter normalization and scale measurement.

Structure analysis works on filters scaled by their absolute maximum
weight, so only the 3x3 pattern matters; the raw mode passes weights
through untouched for the scale statistics and the non-scaled shift
matrices. Filters whose max |w| falls below the degeneracy threshold are
flagged and never divided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .records import FilterRecord, FilterSet, as_weight_matrix

DEFAULT_DEGENERACY_THRESHOLD = 1e-12

SCALED = "scaled"
RAW = "raw"
MODES = (SCALED, RAW)


@dataclass
class ScaledFilterSet:
    """A FilterSet after normalization, with per-filter degeneracy flags."""

    filters: FilterSet
    degenerate_flags: np.ndarray
    mode: str

    def __len__(self) -> int:
        return len(self.filters)

    @property
    def weights(self) -> np.ndarray:
        return self.filters.weights

    def non_degenerate_weights(self) -> np.ndarray:
        return self.filters.weights[~self.degenerate_flags]


def scale_weights(weights: np.ndarray, degeneracy_threshold: float = DEFAULT_DEGENERACY_THRESHOLD):
    """Max-abs scale an (N, 9) matrix; returns (scaled float32, degenerate mask)."""
    w32 = as_weight_matrix(weights)
    w = w32.astype(np.float64)
    peak = np.abs(w).max(axis=1)
    degenerate = peak < degeneracy_threshold
    divisor = np.where(degenerate, 1.0, peak)
    scaled = (w / divisor[:, None]).astype(np.float32)
    scaled[degenerate] = w32[degenerate]
    return scaled, degenerate


def maxabs_scale(
    filters: FilterSet,
    degeneracy_threshold: float = DEFAULT_DEGENERACY_THRESHOLD,
    mode: str = SCALED,
) -> ScaledFilterSet:
    """Normalize each filter by its max absolute weight (or pass through in raw mode)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if degeneracy_threshold <= 0:
        raise ValueError("degeneracy_threshold must be > 0")
    if mode == RAW:
        peak = np.abs(filters.weights.astype(np.float64)).max(axis=1) if len(filters) else np.zeros(0)
        return ScaledFilterSet(filters, peak < degeneracy_threshold, RAW)
    scaled, degenerate = scale_weights(filters.weights, degeneracy_threshold)
    out = FilterSet(
        scaled,
        filters.model_id_values,
        filters.model_id_codes,
        filters.layer_indices,
        filters.filter_ordinals,
        filters.source_query,
    )
    return ScaledFilterSet(out, degenerate, SCALED)


def filter_scale(record) -> float:
    """Weight range of one filter: max(weights) - min(weights)."""
    if isinstance(record, FilterRecord):
        w = np.asarray(record.weights, dtype=np.float64)
    else:
        w = np.asarray(record, dtype=np.float64).reshape(-1)
    if w.shape != (9,):
        raise ValueError(f"expected 9 weights, got shape {w.shape}")
    return float(w.max() - w.min())


def filter_scales(filters: FilterSet) -> np.ndarray:
    """Vectorized filter_scale over a whole set."""
    w = filters.weights.astype(np.float64)
    if not len(filters):
        return np.zeros(0)
    return w.max(axis=1) - w.min(axis=1)


class MaxAbsFilterScaler(TransformerMixin, BaseEstimator):
    """Stateless per-sample scaler: divides each 9-weight row by its max |w|.

    Unlike feature-wise scalers this normalizes each sample independently,
    which is what makes filter structure comparable across models. Rows
    whose max |w| is below ``degeneracy_threshold`` pass through unchanged;
    ``degenerate_mask`` identifies them.
    """

    def __init__(self, degeneracy_threshold: float = DEFAULT_DEGENERACY_THRESHOLD, mode: str = SCALED):
        self.degeneracy_threshold = degeneracy_threshold
        self.mode = mode

    def fit(self, X, y=None):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.degeneracy_threshold <= 0:
            raise ValueError("degeneracy_threshold must be > 0")
        X = as_weight_matrix(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        X = as_weight_matrix(X)
        if self.mode == RAW:
            return X.astype(np.float32)
        scaled, _ = scale_weights(X, self.degeneracy_threshold)
        return scaled

    def degenerate_mask(self, X) -> np.ndarray:
        X = as_weight_matrix(X).astype(np.float64)
        return np.abs(X).max(axis=1) < self.degeneracy_threshold
