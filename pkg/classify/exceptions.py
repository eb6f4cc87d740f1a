from dupless.exceptions import DataError, NumericalError


class SingleClassInput(DataError):
    """Raised when SVM training data holds fewer than two classes"""
    pass


class InvalidModelFile(DataError):
    """Raised when a model file is not a valid SVM1 file"""
    pass


class NoConvergence(NumericalError):
    """Raised when SMO exhausts its iteration cap in strict mode

    The best-so-far model is available as ``model``.
    """

    def __init__(self, message, model=None):
        super().__init__(message)
        self.model = model
