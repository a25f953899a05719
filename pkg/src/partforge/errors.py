"""Exception types raised across the package.

Every failure mode that callers are expected to branch on gets its own
class; all of them derive from :class:`PartforgeError` so a bare
``except PartforgeError`` catches anything this package raises on bad
input or bad data files.
"""


class PartforgeError(Exception):
    """Base class for all partforge errors."""


# --- descriptor files and manifests ---------------------------------------

class MissingFileError(PartforgeError, FileNotFoundError):
    """A referenced file does not exist."""


class BadMagicError(PartforgeError, ValueError):
    """A matrix file does not start with the expected magic bytes."""


class TruncatedPayloadError(PartforgeError, ValueError):
    """A matrix file's size disagrees with its declared shape."""


class NonFiniteValueError(PartforgeError, ValueError):
    """A matrix payload contains NaN or infinity."""


class IoFailureError(PartforgeError, OSError):
    """Writing a file failed."""


class ParseError(PartforgeError, ValueError):
    """A manifest or geometry document is malformed."""


class InconsistentDimensionError(PartforgeError, ValueError):
    """Descriptor files in one dataset disagree on dimensionality."""


class InconsistentRegionCountError(PartforgeError, ValueError):
    """Images in one dataset disagree on the number of regions."""


class DanglingReferenceError(PartforgeError, ValueError):
    """A manifest references a file or image id that does not exist."""


# --- grouping ---------------------------------------------------------------

class KTooLargeError(PartforgeError, ValueError):
    """More clusters requested than there are points."""


class ZeroTargetSizeError(PartforgeError, ValueError):
    """Balance update with more groups than points."""


# --- part models ------------------------------------------------------------

class SingularCovarianceError(PartforgeError, ValueError):
    """Covariance inversion failed even with the ridge term."""


class EmptyPartError(PartforgeError, ValueError):
    """An assignment row carries no mass, so its part is undefined."""


class DimensionMismatchError(PartforgeError, ValueError):
    """Operands have incompatible shapes."""


class TooFewClustersError(PartforgeError, ValueError):
    """Not enough candidate clusters to select the requested parts."""


# --- assignment -------------------------------------------------------------

class ZeroRowError(PartforgeError, ValueError):
    """A part has no nonzero entry, so it cannot be normalized."""


class NoFeasibleBinarizationError(PartforgeError, ValueError):
    """A per-image block cannot host one region per part."""


class InfeasibleBlockError(PartforgeError, ValueError):
    """More parts than regions per image."""


class InstanceTooLargeError(PartforgeError, ValueError):
    """Brute-force enumeration refused: instance exceeds the size cap."""


# --- encoding ---------------------------------------------------------------

class GeometryMismatchError(PartforgeError, ValueError):
    """Region geometry does not match the score matrix."""


class DegenerateEncodingError(PartforgeError, ValueError):
    """An encoded vector is identically zero and cannot be normalized."""


# --- evaluation -------------------------------------------------------------

class SingleClassError(PartforgeError, ValueError):
    """Classifier training needs at least two classes."""


class EmptyClassError(PartforgeError, ValueError):
    """A class has no samples where at least one is required."""


class LengthMismatchError(PartforgeError, ValueError):
    """Two sequences that must align have different lengths."""


class NoPositivesError(PartforgeError, ValueError):
    """Average precision is undefined without a positive entry."""


class NoQueriesError(PartforgeError, ValueError):
    """Mean average precision over an empty query set."""


# --- pipeline ---------------------------------------------------------------

class MissingLabelsError(PartforgeError, ValueError):
    """The requested task needs labels the manifest does not provide."""


class MissingQueriesError(PartforgeError, ValueError):
    """Retrieval requested on a manifest without a query split."""


class UnknownImageError(PartforgeError, KeyError):
    """An image id is not present in the manifest."""


class ConfigInvalidError(PartforgeError, ValueError):
    """A run configuration violates its own constraints."""


class ParamInvalidError(PartforgeError, ValueError):
    """Synthetic dataset parameters are inconsistent."""


# --- oracles ----------------------------------------------------------------

class TruthMismatchError(PartforgeError, ValueError):
    """Planted ground truth does not cover the dataset it is scored on."""
