from dupless.exceptions import DataError, NumericalError


class ShapeMismatch(DataError):
    """Raised when a tensor does not have the shape a layer expects"""
    pass


class LabelOutOfRange(DataError):
    """Raised when a class label falls outside [0, num_classes)"""
    pass


class EmptyDataset(DataError):
    """Raised when training is asked to run without examples"""
    pass


class InvalidParamsFile(DataError):
    """Raised when a parameter file is not a valid NNP1 file"""
    pass


class DivergenceDetected(NumericalError):
    """Raised when the training loss becomes non-finite"""
    pass
