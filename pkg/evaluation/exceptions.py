from dupless.exceptions import DataError


class EmptyManifest(DataError):
    """Raised when a dataset manifest holds no slices"""
    pass


class InvalidManifest(DataError):
    """Raised when manifest rows break the manifest invariants"""
    pass


class TooFewSlices(DataError):
    """Raised when a class has too few slices for the requested split"""
    pass


class LengthMismatch(DataError):
    """Raised when truth and prediction lists differ in length"""
    pass


class MissingEmbeddings(DataError):
    """Raised when a patch or slice has no feature vector"""
    pass


class EmptyEvaluation(DataError):
    """Raised when a sensitivity report is requested for zero items"""
    pass


class SplitLeakage(DataError):
    """Raised when a slice appears on both sides of a split"""
    pass
