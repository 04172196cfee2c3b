"""Group-level analyses: shift matrices, depth statistics, phenotypes.

Groups are formed along meta axes (task, data type, training-set
combination, architecture family, model) or along layer depth (absolute
index or decile relative to the model's conv-layer count). All outputs are
deterministic: labels sorted, one computation per unordered pair, mirrored.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.signal import find_peaks
from scipy.stats import kurtosis as _kurtosis
from scipy.stats import skew as _skew

from .divergence import (
    DivergenceConfig,
    _prepare_coefficients,
    shift,
    shift_from_coefficients,
)
from .errors import IndexOutOfRange, InsufficientData, TooFewGroups
from .pca import CoefficientSet, PcaBasis, fit_basis
from .preprocess import maxabs_scale
from .records import ALL_AXES, FilterSet

logger = logging.getLogger(__name__)

DEFAULT_MIN_GROUP_SIZE = 100

GLOBAL_BASIS = "global"
PAIR_BASIS = "pair"


def depth_decile(layer_index: int, conv_layer_count: int) -> int:
    """Tenth of the conv stack this layer falls in: min(9, floor(10*k/L))."""
    if not 0 <= layer_index < conv_layer_count:
        raise IndexOutOfRange(
            f"layer_index {layer_index} outside [0, {conv_layer_count})"
        )
    return min(9, (10 * layer_index) // conv_layer_count)


def fit_scaled_basis(filters: FilterSet, mode: str = "scaled",
                     exclude_degenerate: bool = True, source: str = "") -> PcaBasis:
    """Preprocess one filter set and fit a basis on it."""
    scaled = maxabs_scale(filters, mode=mode)
    data = scaled.non_degenerate_weights() if exclude_degenerate else scaled.weights
    return fit_basis(data, scaling_mode=mode, source=source or filters.source_query)


def fit_catalog_basis(catalog, query=None, mode: str = "scaled",
                      exclude_degenerate: bool = True) -> PcaBasis:
    """One streaming pass over the catalog: scale, accumulate, decompose."""
    from .pca import MomentAccumulator, fit_from_accumulator

    acc = MomentAccumulator()
    for _, filters in catalog.iter_models(query):
        scaled = maxabs_scale(filters, mode=mode)
        data = scaled.non_degenerate_weights() if exclude_degenerate else scaled.weights
        acc.update(data)
    source = "catalog" if query is None else query.describe()
    return fit_from_accumulator(acc, scaling_mode=mode, source=source)


def group_filters(catalog, axis: str) -> Dict[str, FilterSet]:
    """Partition the catalog's filters along one axis; labels sorted."""
    from .catalog import group_label, sort_labels

    if axis not in ALL_AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {ALL_AXES}")
    parts: Dict[str, list] = {}
    for meta, filters in catalog.iter_models():
        if axis in ("depth_decile", "layer_index"):
            if axis == "depth_decile":
                keys = np.minimum(
                    9, (10 * filters.layer_indices.astype(np.int64)) // meta.conv_layer_count
                )
            else:
                keys = filters.layer_indices
            for key in np.unique(keys):
                parts.setdefault(str(int(key)), []).append(
                    filters.take(np.flatnonzero(keys == key))
                )
        else:
            parts.setdefault(group_label(meta, axis), []).append(filters)
    return {
        label: FilterSet.concat(parts[label], source_query=f"{axis}={label}").sorted()
        for label in sort_labels(parts)
    }


@dataclass(eq=False)
class ShiftMatrix:
    """Pairwise D over labeled groups: symmetric, zero diagonal, non-negative."""

    axis: str
    labels: List[str]
    values: np.ndarray
    config: dict
    omitted: List[tuple] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "axis": self.axis,
            "labels": list(self.labels),
            "values": [[float(v) for v in row] for row in self.values],
            "config": self.config,
            "omitted_groups": [{"label": lb, "filter_count": n} for lb, n in self.omitted],
        }

    def to_csv(self) -> str:
        prov = " ".join(f"{k}={v}" for k, v in sorted(self.config.items()))
        lines = [f"# {prov}", ",".join([self.axis] + self.labels)]
        for label, row in zip(self.labels, self.values):
            lines.append(",".join([label] + [repr(float(v)) for v in row]))
        return "\n".join(lines) + "\n"


def _config_snapshot(config: DivergenceConfig, basis: Optional[PcaBasis],
                     basis_scope: str, min_group_size: int) -> dict:
    snap = config.snapshot()
    snap["basis_scope"] = basis_scope
    snap["min_group_size"] = min_group_size
    snap["basis"] = basis.basis_id if basis is not None else "per-pair"
    return snap


def shift_matrix_from_groups(
    groups: Dict[str, FilterSet],
    basis: Optional[PcaBasis] = None,
    config: DivergenceConfig = DivergenceConfig(),
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE,
    basis_scope: str = GLOBAL_BASIS,
    axis: str = "group",
) -> ShiftMatrix:
    if basis_scope not in (GLOBAL_BASIS, PAIR_BASIS):
        raise ValueError(f"basis_scope must be '{GLOBAL_BASIS}' or '{PAIR_BASIS}'")
    omitted = [(lb, len(fs)) for lb, fs in groups.items() if len(fs) < min_group_size]
    for lb, n in omitted:
        logger.info("omitting group %r: %d filters < minimum %d", lb, n, min_group_size)
    kept = {lb: fs for lb, fs in groups.items() if len(fs) >= min_group_size}
    if len(kept) < 2:
        raise TooFewGroups(
            f"axis {axis!r}: {len(kept)} usable groups (need >= 2); "
            f"omitted {[lb for lb, _ in omitted]}"
        )

    from .catalog import sort_labels

    labels = sort_labels(kept)
    k = len(labels)
    values = np.zeros((k, k))

    if basis_scope == GLOBAL_BASIS:
        if basis is None:
            union = FilterSet.concat([kept[lb] for lb in labels], source_query=f"union:{axis}")
            basis = fit_scaled_basis(union, mode=config.scaling_mode, source=union.source_query)
        coeffs = {lb: _prepare_coefficients(kept[lb], basis, config) for lb in labels}
        for i in range(k):
            for j in range(i + 1, k):
                d = shift_from_coefficients(coeffs[labels[i]], coeffs[labels[j]], basis, config)
                values[i, j] = values[j, i] = d
    else:
        for i in range(k):
            for j in range(i + 1, k):
                pair = FilterSet.concat([kept[labels[i]], kept[labels[j]]])
                pair_basis = fit_scaled_basis(
                    pair, mode=config.scaling_mode, source=f"pair:{labels[i]}|{labels[j]}"
                )
                d = shift(kept[labels[i]], kept[labels[j]], pair_basis, config)
                values[i, j] = values[j, i] = d

    return ShiftMatrix(
        axis=axis,
        labels=labels,
        values=values,
        config=_config_snapshot(config, basis if basis_scope == GLOBAL_BASIS else None,
                                basis_scope, min_group_size),
        omitted=omitted,
    )


def shift_matrix(
    catalog,
    axis: str,
    basis: Optional[PcaBasis] = None,
    config: DivergenceConfig = DivergenceConfig(),
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE,
    basis_scope: str = GLOBAL_BASIS,
) -> ShiftMatrix:
    """Pairwise shift matrix for the catalog grouped along one axis."""
    groups = group_filters(catalog, axis)
    if basis is None and basis_scope == GLOBAL_BASIS:
        basis = fit_catalog_basis(catalog, mode=config.scaling_mode)
    return shift_matrix_from_groups(
        groups, basis=basis, config=config, min_group_size=min_group_size,
        basis_scope=basis_scope, axis=axis,
    )


@dataclass
class ShiftDistribution:
    """Five-number summary of the strict upper triangle of a shift matrix."""

    axis: str
    pair_count: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    outliers: List[tuple]
    config: dict

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["outliers"] = [
            {"a": a, "b": b, "value": float(v)} for a, b, v in self.outliers
        ]
        return d


def distribution_from_matrix(matrix: ShiftMatrix) -> ShiftDistribution:
    k = len(matrix.labels)
    pairs = [
        (matrix.labels[i], matrix.labels[j], float(matrix.values[i, j]))
        for i in range(k)
        for j in range(i + 1, k)
    ]
    vals = np.array([v for _, _, v in pairs])
    q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = [(a, b, v) for a, b, v in pairs if v < lo_fence or v > hi_fence]
    return ShiftDistribution(
        axis=matrix.axis,
        pair_count=len(pairs),
        minimum=float(vals.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        maximum=float(vals.max()),
        outliers=outliers,
        config=matrix.config,
    )


def pairwise_shift_distribution(
    catalog,
    axis: str,
    basis: Optional[PcaBasis] = None,
    config: DivergenceConfig = DivergenceConfig(),
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE,
    basis_scope: str = GLOBAL_BASIS,
) -> ShiftDistribution:
    matrix = shift_matrix(catalog, axis, basis=basis, config=config,
                          min_group_size=min_group_size, basis_scope=basis_scope)
    return distribution_from_matrix(matrix)


# --- filter scales by depth ---


@dataclass
class DecileScaleStats:
    """Mean weight range per layer-depth decile for one model (None = absent)."""

    model_id: str
    means: List[Optional[float]]

    def to_json_dict(self) -> dict:
        return {"model_id": self.model_id, "means": self.means}


def mean_scale_per_decile(model_id: str, catalog) -> DecileScaleStats:
    from .preprocess import filter_scales

    meta = catalog.meta(model_id)  # raises UnknownModel
    filters = catalog.model_filters(model_id)
    scales = filter_scales(filters)
    deciles = np.minimum(
        9, (10 * filters.layer_indices.astype(np.int64)) // meta.conv_layer_count
    )
    means: List[Optional[float]] = []
    for d in range(10):
        mask = deciles == d
        means.append(float(scales[mask].mean()) if mask.any() else None)
    return DecileScaleStats(model_id=model_id, means=means)


# --- phenotype classification ---


@dataclass(frozen=True)
class PhenotypeThresholds:
    """All knobs of the phenotype proxy classifier, surfaced in reports.

    Mode counting works on a moving-average-smoothed histogram and merges
    peaks that are not separated by a real valley; raw per-bin peaks are
    far too noisy at usable sample sizes.
    """

    min_rows: int = 1000
    distinct_ratio: float = 0.01
    round_decimals: int = 4
    top_bins: int = 5
    top_mass: float = 0.5
    bin_count: int = 70
    smooth_window: int = 7
    peak_height_frac: float = 0.05
    valley_frac: float = 0.5
    min_modes: int = 2
    skew_limit: float = 1.0
    zero_band: float = 1e-3
    zero_frac: float = 0.5
    excess_kurtosis_limit: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


SUN = "sun"
SPIKES = "spikes"
SYMBOLS = "symbols"


@dataclass
class Phenotype:
    """Distribution class with the per-component diagnostics that decided it."""

    label: str
    evidence: List[dict]
    thresholds: dict

    def to_json_dict(self) -> dict:
        return asdict(self)


def count_modes(counts: np.ndarray, thresholds: PhenotypeThresholds) -> int:
    """Peaks of the smoothed histogram, merged unless a valley separates them."""
    sm = counts.astype(np.float64)
    if thresholds.smooth_window > 1:
        kernel = np.ones(thresholds.smooth_window) / thresholds.smooth_window
        sm = np.convolve(sm, kernel, mode="same")
    if sm.max() <= 0:
        return 0
    candidates, _ = find_peaks(sm, height=thresholds.peak_height_frac * sm.max())
    if len(candidates) == 0:
        return 1
    modes = [int(candidates[0])]
    for p in candidates[1:]:
        valley = sm[modes[-1] : p + 1].min()
        if valley < thresholds.valley_frac * min(sm[modes[-1]], sm[p]):
            modes.append(int(p))
        elif sm[p] > sm[modes[-1]]:
            modes[-1] = int(p)
    return len(modes)


def component_diagnostics(col: np.ndarray, thresholds: PhenotypeThresholds) -> dict:
    n = len(col)
    distinct = len(np.unique(np.round(col, thresholds.round_decimals)))
    lo, hi = float(col.min()), float(col.max())
    if lo == hi:
        top_mass = 1.0
        mode_count = 1
        skewness = 0.0
        excess_kurtosis = 0.0
    else:
        from .divergence import bin_indices

        counts = np.bincount(
            bin_indices(col, lo, hi, thresholds.bin_count), minlength=thresholds.bin_count
        )
        top = np.sort(counts)[::-1][: thresholds.top_bins]
        top_mass = float(top.sum()) / n
        mode_count = count_modes(counts, thresholds)
        skewness = float(_skew(col))
        excess_kurtosis = float(_kurtosis(col))  # Fisher definition: normal -> 0
        # near-constant columns can yield nan moments; those columns are
        # decided by the distinct/top-mass rules, keep the JSON clean
        if not np.isfinite(skewness):
            skewness = 0.0
        if not np.isfinite(excess_kurtosis):
            excess_kurtosis = 0.0
    return {
        "distinct_ratio": distinct / n,
        "top_bin_mass": top_mass,
        "mode_count": mode_count,
        "skewness": skewness,
        "excess_kurtosis": excess_kurtosis,
        "near_zero_fraction": float(np.mean(np.abs(col) <= thresholds.zero_band)),
    }


def classify_phenotype(
    coeffs, thresholds: PhenotypeThresholds = PhenotypeThresholds()
) -> Phenotype:
    """Reproducible proxy for the sun / spikes / symbols distribution classes."""
    c = coeffs.coefficients if isinstance(coeffs, CoefficientSet) else np.asarray(coeffs, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"expected (N, k) coefficients, got shape {c.shape}")
    if len(c) < thresholds.min_rows:
        raise InsufficientData(
            f"{len(c)} coefficient rows < minimum {thresholds.min_rows}"
        )
    evidence = []
    for i in range(c.shape[1]):
        diag = component_diagnostics(c[:, i], thresholds)
        diag["component"] = i
        evidence.append(diag)

    def any_over(key, limit, absolute=False):
        return any(
            (abs(e[key]) if absolute else e[key]) > limit for e in evidence
        )

    spikes = any(
        e["distinct_ratio"] < thresholds.distinct_ratio or e["top_bin_mass"] > thresholds.top_mass
        for e in evidence
    )
    if spikes:
        label = SPIKES
    else:
        symbols = (
            any(e["mode_count"] >= thresholds.min_modes for e in evidence)
            or any_over("skewness", thresholds.skew_limit, absolute=True)
            or any_over("near_zero_fraction", thresholds.zero_frac)
        )
        if thresholds.excess_kurtosis_limit is not None:
            symbols = symbols or any_over(
                "excess_kurtosis", thresholds.excess_kurtosis_limit, absolute=True
            )
        label = SYMBOLS if symbols else SUN
    return Phenotype(label=label, evidence=evidence, thresholds=thresholds.to_dict())
