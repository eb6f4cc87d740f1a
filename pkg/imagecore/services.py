import logging

import numpy as np

from .exceptions import DimensionMismatch, OddPatchSide, PatchTooLarge
from .rasters import PatchImage, Quadrant, RasterImage

logger = logging.getLogger(__name__)


class TilingService:
    """Non-overlapping tiling of slices and quadrant access within patches"""

    @staticmethod
    def tile_grid(width, height, patch_side):
        """(rows, cols) of the tile grid for a slice of the given size"""
        if patch_side % 2:
            raise OddPatchSide(f"Patch side {patch_side} is odd")
        if patch_side <= 0 or patch_side > min(width, height):
            raise PatchTooLarge(
                f"Patch side {patch_side} does not fit a {width} x {height} slice"
            )
        return height // patch_side, width // patch_side

    @staticmethod
    def tile_slice(image: RasterImage, patch_side: int, slice_id: str = '') -> list:
        """Cut a slice into row-major patches, dropping the right/bottom remainder"""
        rows, cols = TilingService.tile_grid(image.width, image.height, patch_side)
        patches = []
        for tile_row in range(rows):
            for tile_col in range(cols):
                top, left = tile_row * patch_side, tile_col * patch_side
                block = image.pixels[top:top + patch_side, left:left + patch_side]
                patches.append(PatchImage(block.copy(), slice_id=slice_id,
                                          tile_row=tile_row, tile_col=tile_col))

        discarded = image.width * image.height - len(patches) * patch_side * patch_side
        if discarded:
            logger.debug(f"Slice {slice_id or '<anonymous>'}: discarded {discarded} border pixels")
        return patches

    @staticmethod
    def assemble(patches, rows, cols) -> RasterImage:
        """Reassemble row-major patches into the cropped slice"""
        if len(patches) != rows * cols:
            raise DimensionMismatch(f"Expected {rows * cols} patches, got {len(patches)}")
        strips = [np.concatenate([p.pixels for p in patches[r * cols:(r + 1) * cols]], axis=1)
                  for r in range(rows)]
        return RasterImage(np.concatenate(strips, axis=0))

    @staticmethod
    def extract_quadrant(patch: PatchImage, quadrant: Quadrant) -> RasterImage:
        rows, cols = quadrant.slices(patch.side)
        return RasterImage(patch.pixels[rows, cols].copy())

    @staticmethod
    def write_quadrant(patch: PatchImage, quadrant: Quadrant, data: RasterImage) -> PatchImage:
        """Return a copy of ``patch`` with one quadrant replaced by ``data``"""
        half = patch.side // 2
        if data.width != half or data.height != half:
            raise DimensionMismatch(
                f"Quadrant of a {patch.side}-pixel patch is {half} x {half}, "
                f"got {data.width} x {data.height}"
            )
        pixels = patch.pixels.copy()
        rows, cols = quadrant.slices(patch.side)
        pixels[rows, cols] = data.pixels
        return patch.with_pixels(pixels)
