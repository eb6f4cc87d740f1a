from dupless.exceptions import DataError, NumericalError


class PerplexityTooLarge(DataError):
    """Raised when the target perplexity is not below the point count"""
    pass


class DegenerateDistances(DataError):
    """Raised when every pairwise distance is zero"""
    pass


class NonFiniteGradient(NumericalError):
    """Raised when the layout gradient becomes NaN or infinite"""
    pass


class InvalidAffinities(DataError):
    """Raised when an affinity matrix is not square, symmetric and normalized"""
    pass
