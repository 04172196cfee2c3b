"""Full-rank PCA over flattened 3x3 filters via streamed moments.

The dimension is fixed at 9, so the covariance is accumulated in one pass
(batched Welford/Chan updates, mergeable across shards) and the basis
comes from a dense eigendecomposition of the 9x9 sample covariance. That
keeps arbitrarily large filter sets a single streaming pass, with no data
matrix ever materialized.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import InsufficientSamples, ZeroVariance
from .records import KERNEL_CELLS, FilterSet

MIN_SAMPLES = KERNEL_CELLS  # full rank needs at least 9 samples

ORTHONORMALITY_TOL = 1e-8
RATIO_SUM_TOL = 1e-9


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, FilterSet):
        data = data.weights
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != KERNEL_CELLS:
        raise ValueError(f"expected (N, {KERNEL_CELLS}) data, got shape {arr.shape}")
    return arr


class MomentAccumulator:
    """Streaming count / mean / co-moment with associative merging."""

    def __init__(self, dim: int = KERNEL_CELLS):
        self.count = 0
        self.mean = np.zeros(dim)
        self.comoment = np.zeros((dim, dim))

    def update(self, chunk) -> "MomentAccumulator":
        x = _as_matrix(chunk)
        b = len(x)
        if b == 0:
            return self
        batch_mean = x.mean(axis=0)
        centered = x - batch_mean
        batch_m = centered.T @ centered
        if self.count == 0:
            self.count = b
            self.mean = batch_mean
            self.comoment = batch_m
            return self
        total = self.count + b
        delta = batch_mean - self.mean
        self.comoment += batch_m + np.outer(delta, delta) * (self.count * b / total)
        self.mean = self.mean + delta * (b / total)
        self.count = total
        return self

    def copy(self) -> "MomentAccumulator":
        out = MomentAccumulator(len(self.mean))
        out.count = self.count
        out.mean = self.mean.copy()
        out.comoment = self.comoment.copy()
        return out

    def covariance(self) -> np.ndarray:
        if self.count < 2:
            raise InsufficientSamples(f"covariance needs >= 2 samples, have {self.count}")
        return self.comoment / (self.count - 1)


def accumulate(acc: MomentAccumulator, chunk) -> MomentAccumulator:
    """Fold one chunk of filters into the accumulator."""
    return acc.update(chunk)


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    """Combine two accumulators as if both streams had been one."""
    if a.count == 0:
        return b.copy()
    if b.count == 0:
        return a.copy()
    out = a.copy()
    total = a.count + b.count
    delta = b.mean - a.mean
    out.comoment = a.comoment + b.comoment + np.outer(delta, delta) * (a.count * b.count / total)
    out.mean = a.mean + delta * (b.count / total)
    out.count = total
    return out


@dataclass(frozen=True, eq=False)
class PcaBasis:
    """Mean filter, orthonormal components (rows), explained-variance ratios."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratios: np.ndarray
    sample_count: int
    scaling_mode: str = "scaled"
    source: str = ""

    @property
    def basis_id(self) -> str:
        return hashlib.sha256(self._content_json().encode("utf-8")).hexdigest()[:12]

    def _content_json(self) -> str:
        return json.dumps(
            {
                "mean": self.mean.tolist(),
                "components": self.components.tolist(),
                "explained_variance_ratios": self.explained_variance_ratios.tolist(),
                "sample_count": int(self.sample_count),
                "scaling_mode": self.scaling_mode,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    def to_json(self) -> str:
        doc = json.loads(self._content_json())
        doc["basis_id"] = self.basis_id
        doc["source"] = self.source
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PcaBasis":
        doc = json.loads(text)
        return cls(
            mean=np.asarray(doc["mean"], dtype=np.float64),
            components=np.asarray(doc["components"], dtype=np.float64),
            explained_variance_ratios=np.asarray(doc["explained_variance_ratios"], dtype=np.float64),
            sample_count=int(doc["sample_count"]),
            scaling_mode=str(doc.get("scaling_mode", "scaled")),
            source=str(doc.get("source", "")),
        )

    def orthonormality_residual(self) -> float:
        gram = self.components @ self.components.T
        return float(np.abs(gram - np.eye(len(self.components))).max())


@dataclass
class CoefficientSet:
    """PCA coefficients for a filter set, row order matching the source."""

    coefficients: np.ndarray
    basis_id: str
    source: str = ""

    def __len__(self) -> int:
        return len(self.coefficients)

    def component(self, i: int) -> np.ndarray:
        return self.coefficients[:, i]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Largest-magnitude entry of each component made positive (first on ties)."""
    out = components.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def fit_from_accumulator(
    acc: MomentAccumulator, scaling_mode: str = "scaled", source: str = ""
) -> PcaBasis:
    if acc.count < MIN_SAMPLES:
        raise InsufficientSamples(
            f"full-rank PCA needs >= {MIN_SAMPLES} filters, have {acc.count}"
        )
    cov = acc.covariance()
    total_var = float(np.trace(cov))
    if total_var <= 1e-18 * max(1.0, float(acc.mean @ acc.mean)):
        raise ZeroVariance("all filters are identical; no structure to analyze")
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    components = _fix_signs(eigvecs.T)
    order = sorted(range(len(eigvals)), key=lambda i: (-eigvals[i], tuple(components[i])))
    eigvals = eigvals[order]
    components = components[order]
    ratios = eigvals / eigvals.sum()
    return PcaBasis(
        mean=acc.mean.copy(),
        components=components,
        explained_variance_ratios=ratios,
        sample_count=acc.count,
        scaling_mode=scaling_mode,
        source=source,
    )


def fit_basis(data, scaling_mode: str = "scaled", source: str = "") -> PcaBasis:
    """Fit from a FilterSet / array / prefilled MomentAccumulator."""
    if isinstance(data, MomentAccumulator):
        return fit_from_accumulator(data, scaling_mode, source)
    acc = MomentAccumulator()
    acc.update(data)
    return fit_from_accumulator(acc, scaling_mode, source)


def transform_filters(data, basis: PcaBasis, source: str = "") -> CoefficientSet:
    """Project filters onto the basis: c_i = <f - mean, v_i>."""
    x = _as_matrix(data)
    if isinstance(data, FilterSet) and not source:
        source = data.source_query
    coeffs = (x - basis.mean) @ basis.components.T
    return CoefficientSet(coefficients=coeffs, basis_id=basis.basis_id, source=source)


def reconstruct(coeffs, basis: PcaBasis) -> np.ndarray:
    """Invert the projection: f = mean + sum_i c_i v_i."""
    c = coeffs.coefficients if isinstance(coeffs, CoefficientSet) else np.asarray(coeffs, dtype=np.float64)
    return basis.mean + c @ basis.components


class FilterPCA(TransformerMixin, BaseEstimator):
    """Full-rank PCA estimator over 9-d filter space with streaming fit.

    fit() consumes everything at once; partial_fit() folds chunks into the
    running moments and refreshes the basis whenever enough samples have
    been seen, so shard-parallel pipelines can feed it incrementally.
    """

    def __init__(self):
        pass

    def _finalize(self, raise_on_failure: bool):
        try:
            basis = fit_from_accumulator(self._acc)
        except (InsufficientSamples, ZeroVariance):
            if raise_on_failure:
                raise
            return self
        self.mean_ = basis.mean
        self.components_ = basis.components
        self.explained_variance_ratio_ = basis.explained_variance_ratios
        self.explained_variance_ = basis.explained_variance_ratios * float(
            np.trace(self._acc.covariance())
        )
        self.n_samples_seen_ = self._acc.count
        self.n_features_in_ = KERNEL_CELLS
        return self

    def fit(self, X, y=None):
        self._acc = MomentAccumulator()
        self._acc.update(X)
        return self._finalize(raise_on_failure=True)

    def partial_fit(self, X, y=None):
        if not hasattr(self, "_acc"):
            self._acc = MomentAccumulator()
        self._acc.update(X)
        return self._finalize(raise_on_failure=False)

    def merge_accumulator(self, acc: MomentAccumulator):
        """Fold an externally accumulated shard into this estimator."""
        if not hasattr(self, "_acc"):
            self._acc = MomentAccumulator()
        self._acc = merge(self._acc, acc)
        return self._finalize(raise_on_failure=False)

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "components_")
        return (_as_matrix(X) - self.mean_) @ self.components_.T

    def inverse_transform(self, C) -> np.ndarray:
        check_is_fitted(self, "components_")
        c = np.asarray(C, dtype=np.float64)
        return self.mean_ + c @ self.components_

    def to_basis(self, scaling_mode: str = "scaled", source: str = "") -> PcaBasis:
        check_is_fitted(self, "components_")
        return PcaBasis(
            mean=self.mean_,
            components=self.components_,
            explained_variance_ratios=self.explained_variance_ratio_,
            sample_count=self.n_samples_seen_,
            scaling_mode=scaling_mode,
            source=source,
        )

    @classmethod
    def from_basis(cls, basis: PcaBasis) -> "FilterPCA":
        est = cls()
        est.mean_ = basis.mean
        est.components_ = basis.components
        est.explained_variance_ratio_ = basis.explained_variance_ratios
        est.n_samples_seen_ = basis.sample_count
        est.n_features_in_ = KERNEL_CELLS
        return est
