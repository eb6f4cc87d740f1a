from dupless.exceptions import DataError


class MissingStageOutput(DataError):
    """Raised when a stage needs the output of a stage that has not run"""
    pass
