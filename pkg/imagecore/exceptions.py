from dupless.exceptions import DataError


class InvalidRaster(DataError):
    """Raised when a pixel buffer does not describe a valid RGB raster"""
    pass


class PatchTooLarge(DataError):
    """Raised when the patch side exceeds a slice dimension"""
    pass


class OddPatchSide(DataError):
    """Raised when a patch side cannot be split into 2 x 2 quadrants"""
    pass


class DimensionMismatch(DataError):
    """Raised when quadrant data does not match the quadrant extent"""
    pass
