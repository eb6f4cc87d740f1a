from dupless.exceptions import DataError


class DimMismatch(DataError):
    """Raised when vectors that must share a dimension do not"""
    pass


class EmptyList(DataError):
    """Raised when an aggregation receives no vectors"""
    pass


class NonFiniteEmbedding(DataError):
    """Raised when an embedding contains NaN or infinite values"""
    pass


class BadMagic(DataError):
    """Raised when an embedding file does not start with the EMB1 magic"""
    pass


class TruncatedFile(DataError):
    """Raised when an embedding file is shorter than its header promises"""
    pass


class IndexMismatch(DataError):
    """Raised when the sidecar index disagrees with the embedding payload"""
    pass
