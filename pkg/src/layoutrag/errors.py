"""Exception hierarchy shared across the package."""


class LayoutRagError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(LayoutRagError):
    """Dataset file unreadable or contains no valid layouts."""


class ConditionError(LayoutRagError):
    """Condition violates its structural invariants."""


class IndexFormatError(LayoutRagError):
    """Index file is corrupt or not an index file."""


class IndexVersionError(LayoutRagError):
    """Index file was written with an unsupported format version."""


class CheckpointError(LayoutRagError):
    """Checkpoint file is corrupt, truncated, or incompatible."""


class TrainingDivergedError(LayoutRagError):
    """Training loss became non-finite."""


class ModificationError(LayoutRagError):
    """Template modification would produce an invalid layout."""
