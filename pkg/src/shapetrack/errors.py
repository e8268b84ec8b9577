"""Exception types shared across the package."""


class ShapeTrackError(Exception):
    """Base class for every error this package raises on purpose."""


class EmptyMaskError(ShapeTrackError):
    """Mask or region has no foreground pixel."""


class OutOfBoundsError(ShapeTrackError):
    """Query point lies outside the sampled grid."""


class InvalidCountError(ShapeTrackError):
    """Requested count is outside the valid range."""


class EmptyAnchorsError(ShapeTrackError):
    """Anchor set contains no points."""


class MissingContextError(ShapeTrackError):
    """Context masks required by the configured mode were not supplied."""


class ConfigMismatchError(ShapeTrackError):
    """Two descriptors were built under incompatible configurations."""


class ZeroReferenceError(ShapeTrackError):
    """Reference histogram has zero norm, change ratio undefined."""


class DimensionMismatchError(ShapeTrackError):
    """Embedding or descriptor widths disagree."""


class MissingDescriptorError(ShapeTrackError):
    """Record lacks a descriptor required by the operation."""


class FrameOrderError(ShapeTrackError):
    """Records do not advance the track set's frame counter."""


class MissingBankError(ShapeTrackError):
    """Class bank required to resolve a record is absent or empty."""


class ModeMismatchError(ShapeTrackError):
    """Operation does not apply to the track set's mode or record kind."""


class ShapeMismatchError(ShapeTrackError):
    """Indicator shape disagrees with the query list."""


class MalformedIndicatorError(ShapeTrackError):
    """Match indicator is not a one-hot row assignment."""


class MissingClassError(ShapeTrackError):
    """Bank holds no usable entries for the requested class."""


class UnknownAnchorError(ShapeTrackError):
    """No record exists at the requested (track, frame) anchor."""


class UnknownTrackError(ShapeTrackError):
    """Track id not present where required."""


class DegenerateShapeError(ShapeTrackError):
    """Shape rasterizes to zero visible pixels."""


class FrameMismatchError(ShapeTrackError):
    """Masks at a shared frame index disagree in shape."""


class WindowTooLargeError(ShapeTrackError):
    """Evaluation window exceeds the video length."""


class FormatError(ShapeTrackError):
    """File content does not parse under the expected format."""
