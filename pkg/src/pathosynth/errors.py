"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
(file format, manifest, validation) exit 2, anything unexpected exits 3.
"""


class PathosynthError(Exception):
    """Base class for all errors raised by this package."""


class VolumeError(PathosynthError, ValueError):
    """A volume violates its invariants (shape, finiteness, value range)."""


class GridMismatchError(VolumeError):
    """Two volumes that must share a grid do not."""


class InvalidCoordinateError(PathosynthError, ValueError):
    """A sampling coordinate is NaN or infinite."""


class MissingLabelError(PathosynthError, KeyError):
    """A label map contains a label with no matching table or contrast entry."""


class MissingTissueClassError(PathosynthError, ValueError):
    """A required tissue class has no voxels in the label map."""


class NiftiFormatError(PathosynthError, ValueError):
    """A file is not a readable NIfTI-1 volume."""


class ManifestError(PathosynthError, ValueError):
    """A dataset manifest is malformed or references missing files."""


class GenerationError(PathosynthError, RuntimeError):
    """A generation stage failed; carries the stage and subject context."""
