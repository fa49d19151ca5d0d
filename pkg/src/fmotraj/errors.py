"""Exception types raised across the package."""


class FmotrajError(Exception):
    """Base class for all package-specific errors."""


class KernelDimensionError(FmotrajError, ValueError):
    """Blur kernels with incompatible shapes were combined."""


class PathBoundsError(FmotrajError, ValueError):
    """A discrete path leaves the kernel grid."""


class EmptyInputError(FmotrajError, ValueError):
    """No present frames to work with."""


class ExposureUndefinedError(FmotrajError, ValueError):
    """No consecutive frame pair allows estimating the exposure fraction."""


class GravityNotDominantError(FmotrajError, ValueError):
    """The vertical quadratic coefficient is not positive, so the
    pixel-to-meter conversion via gravity is meaningless (e.g. rolling
    motion)."""


class NoCurvatureError(FmotrajError, ValueError):
    """A quadratic coefficient was requested from a degree < 2 segment."""


class KernelTooNoisyError(FmotrajError, ValueError):
    """All kernel values along the path fall below the reliability mask."""


class SynthSpecError(FmotrajError, ValueError):
    """A synthetic sequence specification is invalid or leaves the scene."""


class BundleFormatError(FmotrajError, ValueError):
    """A bundle or trajectory document is malformed.

    ``line`` and ``column`` are set when the underlying text failed to
    parse; they stay ``None`` for structural (schema) problems.
    """

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class BundleVersionError(BundleFormatError):
    """The document's format tag does not match the supported version."""
