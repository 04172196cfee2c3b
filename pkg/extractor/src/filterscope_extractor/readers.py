"""Checkpoint readers: one per serialization format, lazily imported.

A reader yields LayerInfo entries in the model's definition order. Only
leaf layers are visited; containers are transparent. Kernel tensors are
normalized to (out_channels, in_channels_per_group, kh, kw) float32 so the
rest of the pipeline is framework-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import LoadError

CONV = "conv"
TRANSPOSED = "conv_transposed"
OTHER = "other"

TORCH_SUFFIXES = (".pt", ".pth", ".ckpt")
KERAS_SUFFIXES = (".h5", ".hdf5", ".keras")


@dataclass
class LayerInfo:
    name: str
    kind: str  # conv | conv_transposed | other
    type_name: str
    kernel_size: Optional[tuple] = None
    weights: Optional[np.ndarray] = None  # (out, in_per_group, kh, kw) float32
    groups: int = 1


def _torch_layers(path: Path) -> Iterator[LayerInfo]:
    import torch
    from torch import nn

    try:
        obj = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise LoadError(f"cannot load {path}: {e}") from e
    if isinstance(obj, dict):
        raise LoadError(
            f"{path} holds a bare state_dict; layer types are unknown. "
            "Save the full module (torch.save(model)) so convolutions can be classified."
        )
    if not isinstance(obj, nn.Module):
        raise LoadError(f"{path} does not contain an nn.Module (got {type(obj).__name__})")

    for name, mod in obj.named_modules():
        if list(mod.children()):
            continue  # container, not a layer
        label = name or type(mod).__name__
        if isinstance(mod, (nn.ConvTranspose1d, nn.ConvTranspose2d, nn.ConvTranspose3d)):
            yield LayerInfo(name=label, kind=TRANSPOSED, type_name=type(mod).__name__,
                            kernel_size=tuple(mod.kernel_size))
        elif isinstance(mod, (nn.Conv1d, nn.Conv2d, nn.Conv3d)):
            kernel = tuple(mod.kernel_size)
            weights = None
            if kernel == (3, 3):
                weights = mod.weight.detach().cpu().numpy().astype(np.float32)
            yield LayerInfo(name=label, kind=CONV, type_name=type(mod).__name__,
                            kernel_size=kernel, weights=weights, groups=int(mod.groups))
        else:
            yield LayerInfo(name=label, kind=OTHER, type_name=type(mod).__name__)


def _keras_layers(path: Path) -> Iterator[LayerInfo]:
    try:
        from tensorflow import keras
    except ImportError as e:
        raise LoadError(
            f"{path} looks like a Keras model but tensorflow is not installed "
            "(install the 'keras' extra)"
        ) from e
    try:
        model = keras.models.load_model(path, compile=False)
    except Exception as e:
        raise LoadError(f"cannot load {path}: {e}") from e

    def leaves(container):
        for layer in container.layers:
            if hasattr(layer, "layers") and layer.layers:
                yield from leaves(layer)
            else:
                yield layer

    for layer in leaves(model):
        type_name = type(layer).__name__
        if isinstance(layer, keras.layers.Conv2DTranspose) or "Transpose" in type_name:
            yield LayerInfo(name=layer.name, kind=TRANSPOSED, type_name=type_name,
                            kernel_size=tuple(getattr(layer, "kernel_size", ()) or ()))
        elif isinstance(layer, keras.layers.DepthwiseConv2D):
            kernel = tuple(layer.kernel_size)
            weights = None
            groups = 1
            if kernel == (3, 3):
                # (kh, kw, in, mult) -> (in*mult, 1, kh, kw); one group per input channel
                k = layer.get_weights()[0].astype(np.float32)
                groups = int(k.shape[2])
                weights = np.transpose(k, (2, 3, 0, 1)).reshape(-1, 1, 3, 3)
            yield LayerInfo(name=layer.name, kind=CONV, type_name=type_name,
                            kernel_size=kernel, weights=weights, groups=groups)
        elif isinstance(layer, keras.layers.Conv2D):
            kernel = tuple(layer.kernel_size)
            weights = None
            if kernel == (3, 3):
                # (kh, kw, in_per_group, out) -> (out, in_per_group, kh, kw)
                k = layer.get_weights()[0].astype(np.float32)
                weights = np.transpose(k, (3, 2, 0, 1))
            yield LayerInfo(name=layer.name, kind=CONV, type_name=type_name,
                            kernel_size=kernel, weights=weights,
                            groups=int(getattr(layer, "groups", 1)))
        elif isinstance(layer, (keras.layers.Conv1D, keras.layers.Conv3D)):
            yield LayerInfo(name=layer.name, kind=CONV, type_name=type_name,
                            kernel_size=tuple(layer.kernel_size))
        else:
            yield LayerInfo(name=layer.name, kind=OTHER, type_name=type_name)


def iter_layers(path) -> Iterator[LayerInfo]:
    """Dispatch on file suffix to the right reader."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix in TORCH_SUFFIXES:
        return _torch_layers(p)
    if suffix in KERAS_SUFFIXES:
        return _keras_layers(p)
    raise LoadError(
        f"unsupported checkpoint format {suffix!r} "
        f"(supported: {TORCH_SUFFIXES + KERAS_SUFFIXES})"
    )
