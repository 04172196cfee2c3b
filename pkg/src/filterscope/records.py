"""Domain records: filters, model metadata, layer bookkeeping.

Filter weights are stored as 32-bit floats (the interchange precision);
all downstream statistics are computed in 64-bit. A FilterSet is columnar:
one (N, 9) weight matrix plus parallel provenance columns, with model ids
stored as codes into a small table so half-billion-row sets stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import NonFiniteWeight

KERNEL_CELLS = 9

#: grouping axes understood by catalog stats / queries / analytics
META_AXES = ("task", "data_type", "training_sets", "architecture_family", "model_id")
LAYER_AXES = ("depth_decile", "layer_index")
ALL_AXES = META_AXES + LAYER_AXES


@dataclass(frozen=True)
class FilterRecord:
    """One 3x3 kernel (row-major weights) with its provenance."""

    weights: tuple
    model_id: str
    layer_index: int
    filter_ordinal: int


@dataclass
class ModelMeta:
    """Model identity plus the meta axes used for grouping."""

    model_id: str
    name: str
    task: str
    data_type: str
    training_sets: list = field(default_factory=list)
    architecture_family: str = ""
    conv_layer_count: int = 1
    precision_bits: int = 32

    def problems(self) -> list:
        out = []
        if not self.model_id:
            out.append("model_id empty")
        if not self.task:
            out.append("task empty")
        if not self.data_type:
            out.append("data_type empty")
        if int(self.conv_layer_count) < 1:
            out.append("conv_layer_count must be >= 1")
        return out

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "name": self.name,
            "task": self.task,
            "data_type": self.data_type,
            "training_sets": list(self.training_sets),
            "architecture_family": self.architecture_family,
            "conv_layer_count": int(self.conv_layer_count),
            "precision_bits": int(self.precision_bits),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelMeta":
        return cls(
            model_id=str(d.get("model_id", "")),
            name=str(d.get("name", d.get("model_id", ""))),
            task=str(d.get("task", "")),
            data_type=str(d.get("data_type", "")),
            training_sets=[str(s) for s in d.get("training_sets", [])],
            architecture_family=str(d.get("architecture_family", "")),
            conv_layer_count=int(d.get("conv_layer_count", 1)),
            precision_bits=int(d.get("precision_bits", 32)),
        )


@dataclass
class LayerRecord:
    """Bookkeeping for one cataloged conv layer.

    ``in_channels`` counts kernel input channels (per group for grouped
    convolutions), so ``filter_count == in_channels * out_channels`` holds
    whenever both channel counts are known.
    """

    model_id: str
    layer_index: int
    filter_count: int
    in_channels: int = None
    out_channels: int = None
    groups: int = 1

    def problems(self) -> list:
        out = []
        if self.layer_index < 0:
            out.append(f"layer_index {self.layer_index} negative")
        if self.filter_count < 1:
            out.append(f"layer {self.layer_index}: filter_count must be >= 1")
        if self.in_channels is not None and self.in_channels < 1:
            out.append(f"layer {self.layer_index}: in_channels must be >= 1")
        if self.out_channels is not None and self.out_channels < 1:
            out.append(f"layer {self.layer_index}: out_channels must be >= 1")
        if (
            self.in_channels is not None
            and self.out_channels is not None
            and self.filter_count != self.in_channels * self.out_channels
        ):
            out.append(
                f"layer {self.layer_index}: filter_count {self.filter_count} "
                f"!= in_channels*out_channels {self.in_channels * self.out_channels}"
            )
        return out

    def to_dict(self) -> dict:
        d = {
            "model_id": self.model_id,
            "layer_index": int(self.layer_index),
            "filter_count": int(self.filter_count),
        }
        if self.in_channels is not None:
            d["in_channels"] = int(self.in_channels)
        if self.out_channels is not None:
            d["out_channels"] = int(self.out_channels)
        if self.groups != 1:
            d["groups"] = int(self.groups)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerRecord":
        return cls(
            model_id=str(d["model_id"]),
            layer_index=int(d["layer_index"]),
            filter_count=int(d["filter_count"]),
            in_channels=None if d.get("in_channels") is None else int(d["in_channels"]),
            out_channels=None if d.get("out_channels") is None else int(d["out_channels"]),
            groups=int(d.get("groups", 1)),
        )


def as_weight_matrix(weights, allow_nonfinite: bool = False) -> np.ndarray:
    """Coerce to an (N, 9) float32 matrix, rejecting NaN/Inf by default."""
    arr = np.asarray(weights, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != KERNEL_CELLS:
        raise ValueError(f"expected (N, {KERNEL_CELLS}) weights, got shape {arr.shape}")
    if not allow_nonfinite and not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
        raise NonFiniteWeight(f"filter {bad} contains NaN or Inf")
    return arr


class FilterSet:
    """Ordered, columnar collection of filters with provenance."""

    def __init__(
        self,
        weights: np.ndarray,
        model_id_values: Sequence,
        model_id_codes: np.ndarray,
        layer_indices: np.ndarray,
        filter_ordinals: np.ndarray,
        source_query: str = "",
    ):
        self.weights = as_weight_matrix(weights)
        self.model_id_values = tuple(str(v) for v in model_id_values)
        self.model_id_codes = np.asarray(model_id_codes, dtype=np.int32)
        self.layer_indices = np.asarray(layer_indices, dtype=np.int32)
        self.filter_ordinals = np.asarray(filter_ordinals, dtype=np.int32)
        self.source_query = source_query
        n = len(self.weights)
        for name, col in (
            ("model_id_codes", self.model_id_codes),
            ("layer_indices", self.layer_indices),
            ("filter_ordinals", self.filter_ordinals),
        ):
            if len(col) != n:
                raise ValueError(f"{name} length {len(col)} != weight rows {n}")

    # --- constructors ---

    @classmethod
    def single_model(
        cls,
        model_id: str,
        weights,
        layer_indices,
        filter_ordinals,
        source_query: str = "",
    ) -> "FilterSet":
        w = as_weight_matrix(weights)
        return cls(
            w,
            [model_id],
            np.zeros(len(w), dtype=np.int32),
            layer_indices,
            filter_ordinals,
            source_query,
        )

    @classmethod
    def from_records(cls, records: Sequence[FilterRecord], source_query: str = "") -> "FilterSet":
        ids = sorted({r.model_id for r in records})
        code = {m: i for i, m in enumerate(ids)}
        return cls(
            np.array([r.weights for r in records], dtype=np.float32).reshape(-1, KERNEL_CELLS),
            ids,
            np.array([code[r.model_id] for r in records], dtype=np.int32),
            np.array([r.layer_index for r in records], dtype=np.int32),
            np.array([r.filter_ordinal for r in records], dtype=np.int32),
            source_query,
        )

    @classmethod
    def concat(cls, parts: Sequence["FilterSet"], source_query: str = "") -> "FilterSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(source_query)
        ids = sorted({m for p in parts for m in p.model_id_values})
        code = {m: i for i, m in enumerate(ids)}
        codes = [
            np.array([code[p.model_id_values[c]] for c in p.model_id_codes], dtype=np.int32)
            for p in parts
        ]
        return cls(
            np.concatenate([p.weights for p in parts]),
            ids,
            np.concatenate(codes),
            np.concatenate([p.layer_indices for p in parts]),
            np.concatenate([p.filter_ordinals for p in parts]),
            source_query,
        )

    @classmethod
    def empty(cls, source_query: str = "") -> "FilterSet":
        z = np.zeros(0, dtype=np.int32)
        return cls(np.zeros((0, KERNEL_CELLS), dtype=np.float32), [], z, z, z, source_query)

    # --- accessors ---

    def __len__(self) -> int:
        return len(self.weights)

    def model_id(self, i: int) -> str:
        return self.model_id_values[self.model_id_codes[i]]

    def record(self, i: int) -> FilterRecord:
        return FilterRecord(
            weights=tuple(float(w) for w in self.weights[i]),
            model_id=self.model_id(i),
            layer_index=int(self.layer_indices[i]),
            filter_ordinal=int(self.filter_ordinals[i]),
        )

    def records(self) -> Iterator[FilterRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def take(self, index: np.ndarray, source_query: str = None) -> "FilterSet":
        return FilterSet(
            self.weights[index],
            self.model_id_values,
            self.model_id_codes[index],
            self.layer_indices[index],
            self.filter_ordinals[index],
            self.source_query if source_query is None else source_query,
        )

    def sorted(self) -> "FilterSet":
        """Canonical order: (model_id, layer_index, filter_ordinal)."""
        if not len(self):
            return self
        # model_id_values may be unsorted; rank codes by the id string
        rank = np.argsort(np.argsort(np.array(self.model_id_values, dtype=object)))
        order = np.lexsort(
            (self.filter_ordinals, self.layer_indices, rank[self.model_id_codes])
        )
        return self.take(order)

    def same_filters(self, other: "FilterSet") -> bool:
        """Bitwise equality of weights and provenance, ignoring source_query."""
        if len(self) != len(other):
            return False
        if self.weights.tobytes() != other.weights.tobytes():
            return False
        if not np.array_equal(self.layer_indices, other.layer_indices):
            return False
        if not np.array_equal(self.filter_ordinals, other.filter_ordinals):
            return False
        mine = [self.model_id(i) for i in range(len(self))]
        theirs = [other.model_id(i) for i in range(len(other))]
        return mine == theirs
