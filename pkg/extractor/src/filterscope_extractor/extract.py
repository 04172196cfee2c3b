"""Select qualifying kernels from a checkpoint and emit one FPACK file.

Acceptance rules: regular convolutions with 3x3 kernels only. Transposed
convolutions, other kernel sizes, and non-convolution layers are skipped,
each with an explicit reason. Accepted layers are indexed by traversal
(definition) order; filters within a layer are ordered by output channel,
then input channel, matching the row-major flattening of the kernel tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from .errors import MetadataMissing, NoQualifyingLayers
from .fpack_writer import write_fpack
from .readers import CONV, TRANSPOSED, LayerInfo, iter_layers

REASON_KERNEL = "kernel size != 3x3"
REASON_TRANSPOSED = "transposed convolution"
REASON_NON_CONV = "non-convolution"

REQUIRED_META = ("task", "data_type", "training_sets", "architecture_family")


@dataclass
class ExtractionReport:
    model_id: str
    checkpoint: str
    layers_visited: int = 0
    layers_accepted: int = 0
    layers_skipped: List[dict] = field(default_factory=list)
    filters_emitted: int = 0

    def to_json_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "checkpoint": self.checkpoint,
            "layers_visited": self.layers_visited,
            "layers_accepted": self.layers_accepted,
            "layers_skipped": self.layers_skipped,
            "filters_emitted": self.filters_emitted,
        }


def _skip(report: ExtractionReport, info: LayerInfo, reason: str) -> None:
    entry = {"name": info.name, "type": info.type_name, "reason": reason}
    if info.kernel_size:
        entry["kernel_size"] = "x".join(str(k) for k in info.kernel_size)
    report.layers_skipped.append(entry)


def extract(checkpoint_path, meta: dict, out_path) -> ExtractionReport:
    """Walk the checkpoint, write FPACK to out_path, return the report.

    ``meta`` must supply task, data_type, training_sets (non-empty list) and
    architecture_family; name/model_id default to the checkpoint stem.
    """
    missing = [
        key for key in REQUIRED_META
        if not meta.get(key) or (key == "training_sets" and not list(meta["training_sets"]))
    ]
    if missing:
        raise MetadataMissing(f"required metadata fields missing: {', '.join(missing)}")

    checkpoint_path = Path(checkpoint_path)
    model_id = str(meta.get("model_id") or checkpoint_path.stem)
    report = ExtractionReport(model_id=model_id, checkpoint=str(checkpoint_path))

    accepted: List[LayerInfo] = []
    for info in iter_layers(checkpoint_path):
        report.layers_visited += 1
        if info.kind == TRANSPOSED:
            _skip(report, info, REASON_TRANSPOSED)
        elif info.kind == CONV and info.kernel_size != (3, 3):
            _skip(report, info, REASON_KERNEL)
        elif info.kind == CONV:
            accepted.append(info)
        else:
            _skip(report, info, REASON_NON_CONV)

    if not accepted:
        raise NoQualifyingLayers(
            f"{checkpoint_path} has no regular 3x3 convolution layers "
            f"({len(report.layers_skipped)} layers skipped)"
        )

    layer_dicts = []
    blocks = []
    for index, info in enumerate(accepted):
        out_c, in_c = int(info.weights.shape[0]), int(info.weights.shape[1])
        entry = {
            "model_id": model_id,
            "layer_index": index,
            "filter_count": out_c * in_c,
            "in_channels": in_c,
            "out_channels": out_c,
        }
        if info.groups != 1:
            entry["groups"] = int(info.groups)
        layer_dicts.append(entry)
        blocks.append(info.weights.reshape(out_c * in_c, 9))

    weights = np.concatenate(blocks).astype(np.float32)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    model_dict = {
        "model_id": model_id,
        "name": str(meta.get("name") or model_id),
        "task": str(meta["task"]),
        "data_type": str(meta["data_type"]),
        "training_sets": [str(s) for s in meta["training_sets"]],
        "architecture_family": str(meta["architecture_family"]),
        "conv_layer_count": len(accepted),
        "precision_bits": int(meta.get("precision_bits", 32)),
    }
    write_fpack(out_path, model_dict, layer_dicts, weights)

    report.layers_accepted = len(accepted)
    report.filters_emitted = int(len(weights))
    assert report.filters_emitted == sum(d["filter_count"] for d in layer_dicts)
    return report
