"""Exception types raised across the package."""


class CsflowError(Exception):
    """Base class for all csflow errors."""


class PyramidFormatError(CsflowError):
    """Byte stream is not a well-formed CSFP container (bad magic, garbage header)."""


class UnsupportedVersionError(PyramidFormatError):
    """CSFP container declares a version this reader does not know."""


class TruncatedStreamError(PyramidFormatError):
    """CSFP container ended before the declared payload was complete."""


class InvariantViolation(CsflowError):
    """A domain invariant does not hold (odd channels, non-finite values, bad shape chain)."""


class ShapeMismatchError(CsflowError):
    """Shapes are inconsistent: across dataset samples, or between a model and its input."""


class ManifestError(CsflowError):
    """Dataset manifest is malformed or violates the semi-supervised contract."""


class NonFiniteError(CsflowError):
    """A flow evaluation produced NaN or Inf; message carries the block index."""


class UndefinedMetricError(CsflowError):
    """A metric has no defined value for the given input (e.g. single-class AUROC)."""


class AblationError(CsflowError):
    """A training or evaluation failure inside the ablation harness, tagged with the variant."""
