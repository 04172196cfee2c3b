"""Shared generators and independent oracles used across the test suite.

Everything here is deliberately written straight-line (plain loops, plain
formulas) so it stays independent of the library code it checks.
"""

from __future__ import annotations

import json
import math
import struct

import numpy as np

from filterscope.records import FilterSet, LayerRecord, ModelMeta


def handcraft_fpack(n_filters=2, magic=b"FPK1", version=1, kernel=(3, 3), meta=None,
                    payload=None, declared=None):
    """Build FPACK bytes with struct directly, independent of the serializer."""
    if meta is None:
        meta = {
            "model": {
                "model_id": "m0",
                "name": "m0",
                "task": "classification",
                "data_type": "natural",
                "training_sets": ["imagenet1k"],
                "architecture_family": "resnet",
                "conv_layer_count": 1,
                "precision_bits": 32,
            },
            "layers": [
                {"model_id": "m0", "layer_index": 0, "filter_count": n_filters,
                 "in_channels": 1, "out_channels": n_filters},
            ],
        }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    if payload is None:
        payload = b"\x00" * (n_filters * 36)
    head = struct.pack(
        "<4sIQIII", magic, version, n_filters if declared is None else declared,
        kernel[0], kernel[1], len(blob),
    )
    return head + blob + payload

TASKS = ["classification", "segmentation", "object-detection", "gan-generator", "gan-discriminator"]
DATA_TYPES = ["natural", "medical-ct", "medical-mri", "seismic", "astronomy", "formula"]
TRAINING_SETS = ["imagenet1k", "cifar10", "coco", "kitti", "fractaldb"]
FAMILIES = ["resnet", "vgg", "densenet", "unet", "mobilenet"]


def random_model(rng: np.random.Generator, model_id: str = None, n_layers: int = None,
                 task: str = None, data_type: str = None, scale: float = 1.0,
                 min_filters: int = 0, max_channels: int = 6):
    """One random, internally consistent model payload."""
    if model_id is None:
        model_id = f"model-{rng.integers(0, 10**9)}"
    if n_layers is None:
        n_layers = int(rng.integers(1, 5))
    layers = []
    weights = []
    layer_idx = []
    ordinals = []
    total = 0
    li = 0
    while li < n_layers or total < min_filters:
        in_c = int(rng.integers(1, max_channels))
        out_c = int(rng.integers(1, max_channels + 1))
        groups = 2 if rng.random() < 0.15 else 1
        count = in_c * out_c
        layers.append(
            LayerRecord(model_id=model_id, layer_index=li, filter_count=count,
                        in_channels=in_c, out_channels=out_c, groups=groups)
        )
        weights.append((rng.standard_normal((count, 9)) * scale).astype(np.float32))
        layer_idx.extend([li] * count)
        ordinals.extend(range(count))
        total += count
        li += 1
    meta = ModelMeta(
        model_id=model_id,
        name=model_id,
        task=task or str(rng.choice(TASKS)),
        data_type=data_type or str(rng.choice(DATA_TYPES)),
        training_sets=sorted(rng.choice(TRAINING_SETS, size=int(rng.integers(1, 3)), replace=False).tolist()),
        architecture_family=str(rng.choice(FAMILIES)),
        conv_layer_count=li,
    )
    filters = FilterSet.single_model(model_id, np.concatenate(weights), layer_idx, ordinals)
    return meta, layers, filters


def random_filter_set(rng: np.random.Generator, n: int, model_id: str = "m") -> FilterSet:
    """A flat single-layer filter set of n random kernels."""
    w = rng.standard_normal((n, 9)).astype(np.float32)
    return FilterSet.single_model(model_id, w, np.zeros(n, dtype=int), np.arange(n))


# --- straight-line divergence oracle (histogram floor + weighted symmetric KL) ---


def oracle_bin_index(x: float, lo: float, hi: float, bins: int) -> int:
    idx = math.floor(bins * (x - lo) / (hi - lo))
    return min(idx, bins - 1)


def oracle_histogram(values, lo, hi, bins, eps):
    counts = [0] * bins
    for v in values:
        counts[oracle_bin_index(float(v), lo, hi, bins)] += 1
    n = len(values)
    probs = [(c / n + eps) / (1.0 + bins * eps) for c in counts]
    return counts, probs


def oracle_sym_kl(p, q):
    total = 0.0
    for pi, qi in zip(p, q):
        total += pi * math.log(pi / qi) + qi * math.log(qi / pi)
    return total


def oracle_shift(coeffs_a, coeffs_b, weights_per_component, bins, eps):
    """Independent end-to-end evaluation of the variance-weighted shift."""
    coeffs_a = np.asarray(coeffs_a, dtype=float)
    coeffs_b = np.asarray(coeffs_b, dtype=float)
    total = 0.0
    for i in range(coeffs_a.shape[1]):
        a = coeffs_a[:, i]
        b = coeffs_b[:, i]
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        if lo == hi:
            continue
        _, pa = oracle_histogram(a, lo, hi, bins, eps)
        _, pb = oracle_histogram(b, lo, hi, bins, eps)
        total += weights_per_component[i] * oracle_sym_kl(pa, pb)
    return total


def oracle_project(weights, mean, components):
    """Plain-matmul projection used to feed the divergence oracle."""
    x = np.asarray(weights, dtype=float)
    return (x - np.asarray(mean)) @ np.asarray(components).T
