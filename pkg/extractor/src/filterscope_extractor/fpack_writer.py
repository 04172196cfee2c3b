"""Standalone FPACK writer against the documented wire format.

    magic "FPK1" | u32-LE version=1 | u64-LE filter count N | u32-LE kernel_h=3
    | u32-LE kernel_w=3 | u32-LE metadata length M | M bytes UTF-8 JSON
    | N*9 float32-LE weights, ordered by (layer_index, filter_ordinal)

Metadata JSON is `{"model": {...}, "layers": [...]}` with sorted keys and
compact separators. This module deliberately does not import the catalog
package; the byte format is the contract between the two.
"""

from __future__ import annotations

import json
import struct
from typing import List

import numpy as np

MAGIC = b"FPK1"
VERSION = 1
HEADER = struct.Struct("<4sIQIII")


def metadata_json(model: dict, layers: List[dict]) -> bytes:
    doc = {"model": model, "layers": sorted(layers, key=lambda d: d["layer_index"])}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def write_fpack(path, model: dict, layers: List[dict], weights: np.ndarray) -> None:
    """weights: (N, 9) float32, already in (layer_index, filter_ordinal) order."""
    w = np.ascontiguousarray(weights, dtype="<f4")
    if w.ndim != 2 or w.shape[1] != 9:
        raise ValueError(f"expected (N, 9) weights, got {w.shape}")
    if not np.isfinite(w).all():
        raise ValueError("weights contain NaN or Inf")
    if sum(d["filter_count"] for d in layers) != len(w):
        raise ValueError("layer filter counts do not sum to the weight rows")
    blob = metadata_json(model, layers)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, len(w), 3, 3, len(blob)))
        fh.write(blob)
        fh.write(w.tobytes())
