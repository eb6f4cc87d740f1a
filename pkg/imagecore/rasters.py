"""
Raster types: slices, patches and the 2 x 2 quadrant grid of a patch.

Pixels are held as read-only ``uint8`` arrays of shape (height, width, 3),
i.e. row-major with interleaved RGB channels.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import InvalidRaster, OddPatchSide

CHANNELS = 3


def _frozen_pixels(pixels) -> np.ndarray:
    array = np.ascontiguousarray(pixels, dtype=np.uint8)
    if array is pixels:
        array = array.copy()
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RasterImage:
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != CHANNELS:
            raise InvalidRaster(f"Expected (height, width, 3) pixels, got shape {pixels.shape}")
        if pixels.shape[0] < 2 or pixels.shape[1] < 2:
            raise InvalidRaster(f"Raster must be at least 2 x 2, got {pixels.shape[1]} x {pixels.shape[0]}")
        object.__setattr__(self, 'pixels', _frozen_pixels(pixels))

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> 'RasterImage':
        """Build a raster from a row-major, channel-interleaved byte buffer"""
        expected = width * height * CHANNELS
        if len(data) != expected:
            raise InvalidRaster(f"Pixel buffer has {len(data)} bytes, expected {expected}")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width, CHANNELS))

    @classmethod
    def filled(cls, width: int, height: int, value) -> 'RasterImage':
        return cls(np.full((height, width, CHANNELS), value, dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return CHANNELS

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


class Quadrant(Enum):
    TOP_LEFT = (0, 0)
    TOP_RIGHT = (0, 1)
    BOTTOM_LEFT = (1, 0)
    BOTTOM_RIGHT = (1, 1)

    @property
    def grid_row(self) -> int:
        return self.value[0]

    @property
    def grid_col(self) -> int:
        return self.value[1]

    def slices(self, side: int) -> tuple[slice, slice]:
        """Row and column slices addressing this quadrant in a patch of ``side``"""
        half = side // 2
        rows = slice(self.grid_row * half, (self.grid_row + 1) * half)
        cols = slice(self.grid_col * half, (self.grid_col + 1) * half)
        return rows, cols


@dataclass(frozen=True, eq=False)
class PatchImage(RasterImage):
    slice_id: str = ''
    tile_row: int = 0
    tile_col: int = 0

    def __post_init__(self):
        super().__post_init__()
        height, width = self.pixels.shape[:2]
        if height != width:
            raise InvalidRaster(f"Patch must be square, got {width} x {height}")
        if width % 2:
            raise OddPatchSide(f"Patch side {width} is odd")
        if self.tile_row < 0 or self.tile_col < 0:
            raise InvalidRaster(f"Negative tile position ({self.tile_row}, {self.tile_col})")

    @property
    def side(self) -> int:
        return self.pixels.shape[0]

    @property
    def patch_id(self) -> str:
        return make_patch_id(self.slice_id, self.tile_row, self.tile_col)

    def with_pixels(self, pixels) -> 'PatchImage':
        """Same origin, new pixel data"""
        return PatchImage(pixels, slice_id=self.slice_id, tile_row=self.tile_row, tile_col=self.tile_col)

    def __eq__(self, other):
        if not isinstance(other, PatchImage):
            return super().__eq__(other)
        return (self.patch_id == other.patch_id) and super().__eq__(other)

    def __hash__(self):
        return hash((self.patch_id, super().__hash__()))


def make_patch_id(slice_id: str, tile_row: int, tile_col: int) -> str:
    return f"{slice_id}#r{tile_row}c{tile_col}"


def parse_patch_id(patch_id: str) -> tuple[str, int, int]:
    """Inverse of ``make_patch_id``"""
    slice_id, _, position = patch_id.rpartition('#')
    if not slice_id or not position.startswith('r') or 'c' not in position:
        raise InvalidRaster(f"Malformed patch id '{patch_id}'")
    row, _, col = position[1:].partition('c')
    return slice_id, int(row), int(col)
