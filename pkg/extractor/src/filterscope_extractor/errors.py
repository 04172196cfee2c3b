class ExtractorError(Exception):
    """Base class for extraction failures."""


class LoadError(ExtractorError):
    """Checkpoint could not be loaded or carries no layer structure."""


class NoQualifyingLayers(ExtractorError):
    """No regular 3x3 convolution layer found in the checkpoint."""


class MetadataMissing(ExtractorError):
    """Required user-supplied metadata field absent."""
