"""Coefficient histograms and the variance-weighted symmetric KL shift.

The shift D between two filter sets is the sum over principal components
of the symmetric Kullback-Leibler divergence between the per-component
coefficient histograms, weighted by the explained-variance ratio of each
component. Histograms share one range per comparison (min/max over all
compared sets), use uniform bins (70 by default), and are floored by
additive epsilon smoothing so every log term stays finite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import DegenerateRange, EmptyResult, RangeMismatch
from .pca import CoefficientSet, PcaBasis, transform_filters
from .preprocess import RAW, SCALED, scale_weights
from .records import KERNEL_CELLS, FilterSet

logger = logging.getLogger(__name__)

EXPLAINED_VARIANCE = "explained-variance"
UNIFORM = "uniform"
WEIGHTINGS = (EXPLAINED_VARIANCE, UNIFORM)


@dataclass(frozen=True)
class DivergenceConfig:
    """Knobs of the shift metric, recorded in every artifact."""

    bin_count: int = 70
    epsilon: float = 1e-8
    weighting: str = EXPLAINED_VARIANCE
    scaling_mode: str = SCALED

    def __post_init__(self):
        if self.bin_count < 2:
            raise ValueError(f"bin_count must be >= 2, got {self.bin_count}")
        if not (0.0 < self.epsilon < 1.0 / self.bin_count):
            raise ValueError(
                f"epsilon must satisfy 0 < eps < 1/bin_count, got {self.epsilon}"
            )
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        if self.scaling_mode not in (SCALED, RAW):
            raise ValueError(f"scaling_mode must be 'scaled' or 'raw'")

    def snapshot(self) -> dict:
        return {
            "bins": self.bin_count,
            "epsilon": self.epsilon,
            "weighting": self.weighting,
            "scaling_mode": self.scaling_mode,
            "log_base": "e",
        }


@dataclass(eq=False)
class ComponentHistogram:
    """Binned probability distribution of one component's coefficients."""

    component_index: int
    bin_count: int
    lo: float
    hi: float
    counts: np.ndarray
    probabilities: np.ndarray
    sample_count: int
    epsilon: float

    def bin_edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bin_count + 1)

    def bin_centers(self) -> np.ndarray:
        edges = self.bin_edges()
        return 0.5 * (edges[:-1] + edges[1:])

    def same_domain(self, other: "ComponentHistogram") -> bool:
        return (
            self.bin_count == other.bin_count
            and self.lo == other.lo
            and self.hi == other.hi
            and self.epsilon == other.epsilon
        )


def bin_indices(values: np.ndarray, lo: float, hi: float, bin_count: int) -> np.ndarray:
    """floor(bins * (x - lo) / (hi - lo)), clamped to the last bin."""
    scaled = bin_count * (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)
    return np.clip(np.floor(scaled).astype(np.int64), 0, bin_count - 1)


def smooth_probabilities(counts: np.ndarray, sample_count: int, epsilon: float) -> np.ndarray:
    """Additive floor: add eps to every bin's mass, renormalize to sum 1."""
    raw = counts.astype(np.float64) / sample_count
    return (raw + epsilon) / (1.0 + len(counts) * epsilon)


def build_histograms(
    coefficient_sets: Sequence[CoefficientSet],
    component_index: int,
    config: DivergenceConfig = DivergenceConfig(),
) -> List[ComponentHistogram]:
    """One histogram per set over the range shared by all of them."""
    if not coefficient_sets:
        raise EmptyResult("no coefficient sets to histogram")
    basis_ids = {cs.basis_id for cs in coefficient_sets}
    if len(basis_ids) > 1:
        raise ValueError(f"coefficient sets span multiple bases: {sorted(basis_ids)}")
    columns = []
    for cs in coefficient_sets:
        if len(cs) == 0:
            raise EmptyResult("empty coefficient set")
        columns.append(np.asarray(cs.component(component_index), dtype=np.float64))
    lo = min(float(col.min()) for col in columns)
    hi = max(float(col.max()) for col in columns)
    if lo == hi:
        raise DegenerateRange(
            f"component {component_index}: all coefficients equal {lo}"
        )
    out = []
    for col in columns:
        counts = np.bincount(
            bin_indices(col, lo, hi, config.bin_count), minlength=config.bin_count
        )
        out.append(
            ComponentHistogram(
                component_index=component_index,
                bin_count=config.bin_count,
                lo=lo,
                hi=hi,
                counts=counts,
                probabilities=smooth_probabilities(counts, len(col), config.epsilon),
                sample_count=len(col),
                epsilon=config.epsilon,
            )
        )
    return out


def sym_kl(p: ComponentHistogram, q: ComponentHistogram) -> float:
    """Symmetric, non-negative KL over the shared bin domain (natural log)."""
    if not p.same_domain(q):
        raise RangeMismatch(
            f"histogram domains differ: ({p.lo}, {p.hi}, {p.bin_count} bins, eps {p.epsilon})"
            f" vs ({q.lo}, {q.hi}, {q.bin_count} bins, eps {q.epsilon})"
        )
    pp = p.probabilities
    qq = q.probabilities
    return float(np.sum(pp * np.log(pp / qq) + qq * np.log(qq / pp)))


def component_weights(basis: PcaBasis, config: DivergenceConfig) -> np.ndarray:
    if config.weighting == EXPLAINED_VARIANCE:
        return basis.explained_variance_ratios
    return np.full(KERNEL_CELLS, 1.0 / KERNEL_CELLS)


def _prepare_coefficients(data, basis: PcaBasis, config: DivergenceConfig) -> CoefficientSet:
    if isinstance(data, CoefficientSet):
        return data
    weights = data.weights if isinstance(data, FilterSet) else np.asarray(data, dtype=np.float32)
    if len(weights) == 0:
        raise EmptyResult("cannot measure shift of an empty filter set")
    if config.scaling_mode == SCALED:
        weights, _ = scale_weights(weights)
    return transform_filters(weights, basis)


def shift_from_coefficients(
    a: CoefficientSet, b: CoefficientSet, basis: PcaBasis, config: DivergenceConfig
) -> float:
    weights = component_weights(basis, config)
    total = 0.0
    for i in range(KERNEL_CELLS):
        try:
            hist_a, hist_b = build_histograms([a, b], i, config)
        except DegenerateRange:
            logger.info("component %d has a degenerate range; contributes 0", i)
            continue
        total += float(weights[i]) * sym_kl(hist_a, hist_b)
    return total


def shift(a, b, basis: PcaBasis, config: DivergenceConfig = DivergenceConfig()) -> float:
    """Variance-weighted symmetric-KL shift D between two filter sets."""
    if config.scaling_mode != basis.scaling_mode:
        logger.warning(
            "config scaling_mode %r differs from basis scaling_mode %r",
            config.scaling_mode,
            basis.scaling_mode,
        )
    ca = _prepare_coefficients(a, basis, config)
    cb = _prepare_coefficients(b, basis, config)
    return shift_from_coefficients(ca, cb, basis, config)
