"""FPACK binary interchange and the CSV fallback encoding.

Layout (all integers little-endian):

    magic "FPK1" | u32 version=1 | u64 filter count N | u32 kernel_h=3
    | u32 kernel_w=3 | u32 metadata byte length M | M bytes UTF-8 JSON
    | N*9 float32 weights

Metadata JSON holds ``{"model": ModelMeta, "layers": [LayerRecord...]}``.
Weights are ordered by (layer_index, filter_ordinal), each filter row-major.
The writer emits canonical JSON (sorted keys, compact separators, layers
sorted by layer_index), which is what makes serialize(parse(x)) == x
bit-exact for files in canonical form.
"""

from __future__ import annotations

import io
import json
import struct
from typing import Tuple

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    FieldCount,
    HeaderMismatch,
    InvariantViolation,
    MetadataInvalid,
    NonFiniteWeight,
    NonNumeric,
    TruncatedPayload,
    UnsupportedVersion,
)
from .records import KERNEL_CELLS, FilterSet, LayerRecord, ModelMeta

MAGIC = b"FPK1"
VERSION = 1
HEADER = struct.Struct("<4sIQIII")  # magic, version, N, kernel_h, kernel_w, M
FILTER_BYTES = KERNEL_CELLS * 4

CSV_HEADER = "model_id,layer_index,filter_ordinal," + ",".join(f"w{i}" for i in range(9))


def _check_model_payload(meta: ModelMeta, layers, filters: FilterSet, err=MetadataInvalid):
    """Shared structural validation for a single-model payload."""
    problems = meta.problems()
    seen = set()
    for rec in layers:
        problems.extend(rec.problems())
        if rec.model_id != meta.model_id:
            problems.append(f"layer {rec.layer_index}: model_id {rec.model_id!r} != {meta.model_id!r}")
        if rec.layer_index in seen:
            problems.append(f"duplicate layer_index {rec.layer_index}")
        seen.add(rec.layer_index)
        if rec.layer_index >= meta.conv_layer_count:
            problems.append(
                f"layer_index {rec.layer_index} >= conv_layer_count {meta.conv_layer_count}"
            )
    total = sum(rec.filter_count for rec in layers)
    if total != len(filters):
        problems.append(f"layer filter_count sum {total} != filter count {len(filters)}")
    if problems:
        raise err("; ".join(problems))


def _expand_provenance(layers) -> Tuple[np.ndarray, np.ndarray]:
    """(layer_index, filter_ordinal) columns implied by sorted layer records."""
    idx = []
    ords = []
    for rec in sorted(layers, key=lambda r: r.layer_index):
        idx.append(np.full(rec.filter_count, rec.layer_index, dtype=np.int32))
        ords.append(np.arange(rec.filter_count, dtype=np.int32))
    if not idx:
        return np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int32)
    return np.concatenate(idx), np.concatenate(ords)


def _metadata_from_json(blob: bytes):
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MetadataInvalid(f"metadata is not valid UTF-8 JSON: {e}") from None
    if not isinstance(doc, dict) or "model" not in doc:
        raise MetadataInvalid("metadata JSON must be an object with a 'model' entry")
    model = doc["model"]
    for key in ("task", "data_type"):
        if not str(model.get(key, "") or ""):
            raise MetadataInvalid(f"model metadata missing {key}")
    meta = ModelMeta.from_dict(model)
    raw_layers = doc.get("layers", [])
    layers = [
        LayerRecord.from_dict({**d, "model_id": d.get("model_id", meta.model_id)})
        for d in raw_layers
    ]
    return meta, layers


def _metadata_to_json(meta: ModelMeta, layers) -> bytes:
    doc = {
        "model": meta.to_dict(),
        "layers": [rec.to_dict() for rec in sorted(layers, key=lambda r: r.layer_index)],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def parse_fpack(data: bytes):
    """Decode one FPACK file into (ModelMeta, [LayerRecord], FilterSet)."""
    if len(data) < len(MAGIC):
        raise TruncatedPayload(f"file is {len(data)} bytes, shorter than the magic")
    if data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {bytes(data[:4])!r}")
    if len(data) < HEADER.size:
        raise TruncatedPayload(f"header needs {HEADER.size} bytes, file has {len(data)}")
    _, version, count, kernel_h, kernel_w, meta_len = HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} (parser supports {VERSION})")
    if (kernel_h, kernel_w) != (3, 3):
        raise UnsupportedVersion(f"kernel {kernel_h}x{kernel_w} (only 3x3 supported)")
    if len(data) < HEADER.size + meta_len:
        raise TruncatedPayload("metadata block extends past end of file")
    meta, layers = _metadata_from_json(data[HEADER.size : HEADER.size + meta_len])

    payload = data[HEADER.size + meta_len :]
    expected = count * FILTER_BYTES
    if len(payload) < expected:
        raise TruncatedPayload(
            f"weights payload has {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise CountMismatch(
            f"payload decodes to more than the declared {count} filters "
            f"({len(payload) - expected} trailing bytes)"
        )
    weights = np.frombuffer(payload, dtype="<f4").reshape(count, KERNEL_CELLS)
    if not np.isfinite(weights).all():
        bad = int(np.flatnonzero(~np.isfinite(weights).all(axis=1))[0])
        raise NonFiniteWeight(f"filter {bad} contains NaN or Inf")

    declared = sum(rec.filter_count for rec in layers)
    if declared != count:
        raise MetadataInvalid(f"layer filter_count sum {declared} != filter count {count}")
    layer_idx, ordinals = _expand_provenance(layers)
    filters = FilterSet.single_model(
        meta.model_id, weights.astype(np.float32), layer_idx, ordinals,
        source_query=f"fpack:{meta.model_id}",
    )
    _check_model_payload(meta, layers, filters, err=MetadataInvalid)
    return meta, layers, filters


def serialize_fpack(meta: ModelMeta, layers, filters: FilterSet) -> bytes:
    """Encode a single-model payload in canonical FPACK form."""
    fs = filters.sorted()
    _check_model_payload(meta, layers, fs, err=InvariantViolation)
    expect_idx, expect_ord = _expand_provenance(layers)
    if not (
        np.array_equal(fs.layer_indices, expect_idx)
        and np.array_equal(fs.filter_ordinals, expect_ord)
    ):
        raise InvariantViolation("filter provenance does not match layer records")
    used = {fs.model_id_values[c] for c in np.unique(fs.model_id_codes)}
    if used - {meta.model_id}:
        raise InvariantViolation("filters carry a different model_id than the metadata")
    blob = _metadata_to_json(meta, layers)
    out = io.BytesIO()
    out.write(HEADER.pack(MAGIC, VERSION, len(fs), 3, 3, len(blob)))
    out.write(blob)
    out.write(np.ascontiguousarray(fs.weights, dtype="<f4").tobytes())
    return out.getvalue()


# --- CSV encoding ---


def parse_csv(text: str, metadata) -> tuple:
    """Decode the CSV encoding; metadata comes separately as JSON (str or dict).

    Returns the same (ModelMeta, [LayerRecord], FilterSet) triple as
    parse_fpack would for equivalent content.
    """
    if isinstance(metadata, str):
        try:
            metadata = json.loads(metadata)
        except json.JSONDecodeError as e:
            raise MetadataInvalid(f"metadata is not valid JSON: {e}") from None
    meta, layers = _metadata_from_json(
        json.dumps(metadata if "model" in metadata else {"model": metadata}).encode()
    )

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != CSV_HEADER:
        found = lines[0].strip() if lines else "<empty file>"
        raise HeaderMismatch(f"expected header {CSV_HEADER!r}, found {found!r}")

    n = len(lines) - 1
    weights = np.zeros((n, KERNEL_CELLS), dtype=np.float32)
    layer_idx = np.zeros(n, dtype=np.int32)
    ordinals = np.zeros(n, dtype=np.int32)
    for row, ln in enumerate(lines[1:]):
        fields = ln.split(",")
        if len(fields) != 3 + KERNEL_CELLS:
            raise FieldCount(f"row {row + 1}: expected {3 + KERNEL_CELLS} fields, got {len(fields)}")
        if fields[0] != meta.model_id:
            raise MetadataInvalid(
                f"row {row + 1}: model_id {fields[0]!r} != metadata model_id {meta.model_id!r}"
            )
        try:
            layer_idx[row] = int(fields[1])
            ordinals[row] = int(fields[2])
        except ValueError:
            raise NonNumeric(f"row {row + 1}: non-integer layer_index/filter_ordinal") from None
        try:
            vals = [float(f) for f in fields[3:]]
        except ValueError:
            raise NonNumeric(f"row {row + 1}: non-numeric weight") from None
        if not all(np.isfinite(vals)):
            raise NonFiniteWeight(f"row {row + 1} contains NaN or Inf")
        weights[row] = np.array(vals, dtype=np.float32)

    keys = set(zip(layer_idx.tolist(), ordinals.tolist()))
    if len(keys) != n:
        raise MetadataInvalid("duplicate (layer_index, filter_ordinal) rows")
    filters = FilterSet.single_model(
        meta.model_id, weights, layer_idx, ordinals, source_query=f"csv:{meta.model_id}"
    ).sorted()

    if not layers:
        counts = np.bincount(filters.layer_indices) if n else np.zeros(0, dtype=int)
        layers = [
            LayerRecord(model_id=meta.model_id, layer_index=i, filter_count=int(c))
            for i, c in enumerate(counts)
            if c > 0
        ]
    expect_idx, expect_ord = _expand_provenance(layers)
    if not (
        np.array_equal(filters.layer_indices, expect_idx)
        and np.array_equal(filters.filter_ordinals, expect_ord)
    ):
        raise MetadataInvalid("CSV rows do not form dense 0-based ordinals per layer record")
    _check_model_payload(meta, layers, filters, err=MetadataInvalid)
    return meta, layers, filters


def serialize_csv(meta: ModelMeta, layers, filters: FilterSet) -> str:
    """Canonical CSV: header row, filters in (layer, ordinal) order, repr floats."""
    if "," in meta.model_id or "\n" in meta.model_id:
        raise InvariantViolation("model_id containing ',' or newline cannot be CSV-encoded")
    fs = filters.sorted()
    _check_model_payload(meta, layers, fs, err=InvariantViolation)
    rows = [CSV_HEADER]
    for i in range(len(fs)):
        cells = [fs.model_id(i), str(int(fs.layer_indices[i])), str(int(fs.filter_ordinals[i]))]
        cells.extend(repr(float(w)) for w in fs.weights[i])
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def read_fpack_file(path):
    with open(path, "rb") as fh:
        return parse_fpack(fh.read())


def write_fpack_file(path, meta: ModelMeta, layers, filters: FilterSet) -> None:
    data = serialize_fpack(meta, layers, filters)
    with open(path, "wb") as fh:
        fh.write(data)
