"""Reading and writing slice and patch rasters (PNG, binary PPM)."""
import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import InvalidRaster
from .rasters import RasterImage

logger = logging.getLogger(__name__)

FORMATS = {'.png': 'PNG', '.ppm': 'PPM'}


class ImageIO:
    """Utility to move rasters between disk and memory"""

    @staticmethod
    def read_image(path) -> RasterImage:
        """Read a PNG or P6 PPM file as an 8-bit RGB raster"""
        path = Path(path)
        try:
            with Image.open(path) as image:
                if image.mode != 'RGB':
                    logger.debug(f"Converting {path.name} from {image.mode} to RGB")
                    image = image.convert('RGB')
                pixels = np.asarray(image, dtype=np.uint8)
        except (UnidentifiedImageError, OSError) as e:
            raise InvalidRaster(f"Cannot read image {path}: {e}") from e
        return RasterImage(pixels)

    @staticmethod
    def write_image(raster: RasterImage, path) -> Path:
        """Write a raster; the format follows the file extension"""
        path = Path(path)
        fmt = FORMATS.get(path.suffix.lower())
        if fmt is None:
            raise InvalidRaster(f"Unsupported image extension '{path.suffix}' for {path}")
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.ascontiguousarray(raster.pixels)).save(path, format=fmt)
        return path

    @staticmethod
    def write_ppm(raster: RasterImage, path) -> Path:
        """Debug dump as binary PPM (P6)"""
        return ImageIO.write_image(raster, Path(path).with_suffix('.ppm'))
