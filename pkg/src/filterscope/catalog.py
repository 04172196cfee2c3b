"""Persistent filter catalog: one manifest JSON plus one FPACK blob per model.

The store is a plain directory so it stays inspectable and append-friendly:

    <root>/manifest.json        all ModelMeta + LayerRecords, sorted by model_id
    <root>/blobs/<id>.fpack     weights, one blob per model

Writes replace the manifest atomically, so concurrent readers always see a
consistent snapshot (single-writer, multi-reader discipline).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .analytics import depth_decile
from .errors import DuplicateModel, EmptyResult, InvariantViolation, UnknownModel
from .fpack import _check_model_payload, read_fpack_file, serialize_fpack
from .records import ALL_AXES, FilterSet, LayerRecord, ModelMeta

MANIFEST_NAME = "manifest.json"
BLOB_DIR = "blobs"
FORMAT_NAME = "filterscope-catalog"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Query:
    """Conjunctive predicate over model metadata and layer depth."""

    task: Optional[str] = None
    data_type: Optional[str] = None
    training_set: Optional[str] = None
    architecture_family: Optional[str] = None
    model_id: Optional[str] = None
    depth_decile: Optional[int] = None
    layer_index: Optional[int] = None

    def describe(self) -> str:
        parts = [
            f"{f.name}={getattr(self, f.name)}"
            for f in fields(self)
            if getattr(self, f.name) is not None
        ]
        return "&".join(parts) if parts else "all"

    def matches_meta(self, meta: ModelMeta) -> bool:
        if self.task is not None and meta.task != self.task:
            return False
        if self.data_type is not None and meta.data_type != self.data_type:
            return False
        if self.training_set is not None and self.training_set not in meta.training_sets:
            return False
        if self.architecture_family is not None and meta.architecture_family != self.architecture_family:
            return False
        if self.model_id is not None and meta.model_id != self.model_id:
            return False
        return True

    def layer_mask(self, meta: ModelMeta, layer_indices: np.ndarray) -> np.ndarray:
        mask = np.ones(len(layer_indices), dtype=bool)
        if self.layer_index is not None:
            mask &= layer_indices == self.layer_index
        if self.depth_decile is not None:
            deciles = np.minimum(9, (10 * layer_indices.astype(np.int64)) // meta.conv_layer_count)
            mask &= deciles == self.depth_decile
        return mask


@dataclass(frozen=True)
class StatsRow:
    label: str
    model_count: int
    layer_count: int
    filter_count: int


def _blob_name(model_id: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9._-]+", "_", model_id)[:60] or "model"
    digest = hashlib.sha1(model_id.encode("utf-8")).hexdigest()[:10]
    return f"{slug}-{digest}.fpack"


def group_label(meta: ModelMeta, axis: str) -> str:
    """Model-level group label for one meta axis."""
    if axis == "task":
        return meta.task
    if axis == "data_type":
        return meta.data_type
    if axis == "training_sets":
        return "+".join(sorted(meta.training_sets)) if meta.training_sets else "(none)"
    if axis == "architecture_family":
        return meta.architecture_family or "(none)"
    if axis == "model_id":
        return meta.model_id
    raise ValueError(f"not a model-level axis: {axis}")


def sort_labels(labels) -> list:
    """Deterministic label order: numeric when every label is an integer."""
    labels = list(labels)
    if labels and all(re.fullmatch(r"-?\d+", lb) for lb in labels):
        return sorted(labels, key=int)
    return sorted(labels)


class FilterCatalog:
    """Queryable directory store of filters and model metadata."""

    def __init__(self, root, create: bool = True):
        self.root = Path(root)
        if create:
            (self.root / BLOB_DIR).mkdir(parents=True, exist_ok=True)
            if not (self.root / MANIFEST_NAME).exists():
                self._write_manifest({"format": FORMAT_NAME, "version": FORMAT_VERSION, "models": []})

    # --- manifest plumbing ---

    def _manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def _read_manifest(self) -> dict:
        with open(self._manifest_path(), "r", encoding="utf-8") as fh:
            return json.load(fh)

    def _write_manifest(self, doc: dict) -> None:
        doc["models"] = sorted(doc["models"], key=lambda m: m["model"]["model_id"])
        tmp = self._manifest_path().with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, self._manifest_path())

    def _entries(self) -> list:
        return self._read_manifest()["models"]

    def _entry(self, model_id: str) -> dict:
        for entry in self._entries():
            if entry["model"]["model_id"] == model_id:
                return entry
        raise UnknownModel(model_id)

    # --- write path ---

    def register_model(self, meta: ModelMeta, layers, filters: FilterSet) -> str:
        doc = self._read_manifest()
        if any(e["model"]["model_id"] == meta.model_id for e in doc["models"]):
            raise DuplicateModel(meta.model_id)
        filters = filters.sorted()
        _check_model_payload(meta, layers, filters, err=InvariantViolation)
        blob_rel = f"{BLOB_DIR}/{_blob_name(meta.model_id)}"
        data = serialize_fpack(meta, layers, filters)
        with open(self.root / blob_rel, "wb") as fh:
            fh.write(data)
        doc["models"].append(
            {
                "model": meta.to_dict(),
                "layers": [rec.to_dict() for rec in sorted(layers, key=lambda r: r.layer_index)],
                "blob": blob_rel,
                "filter_count": len(filters),
            }
        )
        self._write_manifest(doc)
        return meta.model_id

    # --- read path ---

    def model_ids(self) -> list:
        return [e["model"]["model_id"] for e in self._entries()]

    def meta(self, model_id: str) -> ModelMeta:
        return ModelMeta.from_dict(self._entry(model_id)["model"])

    def layers(self, model_id: str) -> list:
        return [LayerRecord.from_dict(d) for d in self._entry(model_id)["layers"]]

    def model_filters(self, model_id: str) -> FilterSet:
        entry = self._entry(model_id)
        _, _, filters = read_fpack_file(self.root / entry["blob"])
        return filters

    def iter_models(self, query: Optional[Query] = None) -> Iterator:
        """Yield (ModelMeta, FilterSet) pairs for models matching the query."""
        q = query or Query()
        for entry in self._entries():
            meta = ModelMeta.from_dict(entry["model"])
            if not q.matches_meta(meta):
                continue
            filters = self.model_filters(meta.model_id)
            mask = q.layer_mask(meta, filters.layer_indices)
            if mask.all():
                yield meta, filters
            elif mask.any():
                yield meta, filters.take(np.flatnonzero(mask))

    def query(self, query: Optional[Query] = None) -> FilterSet:
        q = query or Query()
        parts = [filters for _, filters in self.iter_models(q)]
        result = FilterSet.concat(parts, source_query=q.describe()).sorted()
        if not len(result):
            raise EmptyResult(f"query {q.describe()!r} matched no filters")
        return result

    # --- statistics ---

    def stats(self, axis: str) -> list:
        """(label, model_count, layer_count, filter_count) rows; counts partition the catalog."""
        if axis not in ALL_AXES:
            raise ValueError(f"unknown axis {axis!r}; expected one of {ALL_AXES}")
        models = {}
        layer_counts = {}
        filter_counts = {}
        for entry in self._entries():
            meta = ModelMeta.from_dict(entry["model"])
            for rec_d in entry["layers"]:
                rec = LayerRecord.from_dict(rec_d)
                if axis == "depth_decile":
                    label = str(depth_decile(rec.layer_index, meta.conv_layer_count))
                elif axis == "layer_index":
                    label = str(rec.layer_index)
                else:
                    label = group_label(meta, axis)
                models.setdefault(label, set()).add(meta.model_id)
                layer_counts[label] = layer_counts.get(label, 0) + 1
                filter_counts[label] = filter_counts.get(label, 0) + rec.filter_count
            if not entry["layers"] and axis not in ("depth_decile", "layer_index"):
                label = group_label(meta, axis)
                models.setdefault(label, set()).add(meta.model_id)
                layer_counts.setdefault(label, 0)
                filter_counts.setdefault(label, 0)
        return [
            StatsRow(
                label=label,
                model_count=len(models[label]),
                layer_count=layer_counts[label],
                filter_count=filter_counts[label],
            )
            for label in sort_labels(models)
        ]

    def totals(self) -> StatsRow:
        entries = self._entries()
        return StatsRow(
            label="total",
            model_count=len(entries),
            layer_count=sum(len(e["layers"]) for e in entries),
            filter_count=sum(e["filter_count"] for e in entries),
        )
