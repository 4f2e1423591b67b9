"""
Exception hierarchy for the clumped nuclei splitter

Her modül kendi hata tipini buradan türetir; pipeline katmanı hepsini
SegmentationError olarak yakalayıp aşama (stage) bilgisi ekler.
"""


class SegmentationError(Exception):
    """Base class for every domain error raised by the splitter."""


class ImageFormatError(SegmentationError, ValueError):
    """Unsupported image layout, bit depth or intensity range."""


class EmptyRegionError(SegmentationError, ValueError):
    """A region that must contain pixels rasterized to nothing."""


class InvalidPairError(SegmentationError, ValueError):
    """A point pair whose score is undefined (coincident, flat endpoints)."""


class EllipseFitError(SegmentationError):
    """Direct least-squares fit produced no ellipse."""


class TraceError(SegmentationError, ValueError):
    """Dividing-curve endpoints are invalid."""


class MetricError(SegmentationError, ValueError):
    """Metric inputs are inconsistent (shape mismatch, empty point sets)."""


class SyntheticSpecError(SegmentationError, ValueError):
    """Synthetic clump description cannot be rendered on its canvas."""


class ConfigError(SegmentationError, ValueError):
    """Configuration file is malformed or violates a parameter invariant."""


class PipelineError(SegmentationError):
    """A pipeline stage failed; `stage` names it and `cause` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
