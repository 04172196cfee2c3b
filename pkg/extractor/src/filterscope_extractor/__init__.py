"""Checkpoint-to-FPACK extractor: walks trained models, keeps qualifying
3x3 regular-convolution kernels, and emits the interchange file the
filterscope catalog ingests."""

from .errors import ExtractorError, LoadError, MetadataMissing, NoQualifyingLayers
from .extract import ExtractionReport, extract

__version__ = "0.1.0"

__all__ = [
    "ExtractionReport",
    "ExtractorError",
    "LoadError",
    "MetadataMissing",
    "NoQualifyingLayers",
    "extract",
    "__version__",
]
