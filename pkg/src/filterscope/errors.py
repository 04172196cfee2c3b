"""Exception hierarchy.

Two branches matter for the CLI exit-code contract: ``DataError`` (bad or
missing input data, exit 3) and ``ComputeError`` (analysis preconditions
not met, exit 4). Usage errors are handled by the CLI layer itself (exit 2).
"""


class FilterscopeError(Exception):
    """Base class for all filterscope errors."""


class DataError(FilterscopeError):
    """Input data is malformed, missing, or violates an invariant."""


class ComputeError(FilterscopeError):
    """An analysis operation cannot proceed on the given inputs."""


# --- FPACK / CSV parsing ---

class BadMagic(DataError):
    """File does not start with the FPACK magic bytes."""


class UnsupportedVersion(DataError):
    """FPACK version or kernel geometry not supported by this parser."""


class TruncatedPayload(DataError):
    """File ends before the declared payload is complete."""


class CountMismatch(DataError):
    """Declared filter count does not match the decoded payload."""


class NonFiniteWeight(DataError):
    """A filter weight is NaN or infinite."""


class MetadataInvalid(DataError):
    """Metadata JSON is missing required fields or inconsistent."""


class HeaderMismatch(DataError):
    """CSV header row does not match the expected column layout."""


class FieldCount(DataError):
    """CSV row has the wrong number of fields."""


class NonNumeric(DataError):
    """CSV field expected to be numeric could not be parsed."""


# --- catalog ---

class DuplicateModel(DataError):
    """A model with this id is already registered."""


class InvariantViolation(DataError):
    """A record violates a domain invariant."""


class UnknownModel(DataError):
    """No model with this id in the catalog."""


class EmptyResult(ComputeError):
    """Query matched no filters (group too small to analyze)."""


# --- PCA ---

class InsufficientSamples(ComputeError):
    """Full-rank PCA needs at least 9 non-degenerate filters."""


class ZeroVariance(ComputeError):
    """All filters identical; covariance has no spectrum to analyze."""


# --- divergence ---

class DegenerateRange(ComputeError):
    """All values identical across compared sets; histogram range collapses."""


class RangeMismatch(ComputeError):
    """Histograms being compared do not share range and bin count."""


# --- analytics ---

class TooFewGroups(ComputeError):
    """Fewer than two usable groups along the requested axis."""


class InsufficientData(ComputeError):
    """Not enough coefficient rows for a reliable classification."""


class IndexOutOfRange(ComputeError):
    """Layer index outside [0, conv_layer_count)."""
