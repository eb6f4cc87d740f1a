"""Per-class rendering styles and the dataset configuration."""
from dataclasses import dataclass, field

from dupless.exceptions import ConfigError
from evaluation.manifest import TissueClass
from imagecore.exceptions import OddPatchSide, PatchTooLarge
from imagecore.services import TilingService


@dataclass(frozen=True)
class ClassStyle:
    """Elliptical "nuclei" over a tinted background.

    ``density`` is the expected number of blobs per 10,000 pixels.
    """
    density: float
    radius_range: tuple
    background: tuple
    foreground: tuple
    tint_strength: float = 10.0
    color_jitter: float = 12.0

    def __post_init__(self):
        low, high = self.radius_range
        if not 0 < low <= high:
            raise ConfigError(f"Invalid blob radius range {self.radius_range}")
        if self.density < 0:
            raise ConfigError(f"Blob density must be >= 0, got {self.density}")


# Red dominates every background; it drops from class to class while blob
# density rises, so per-class channel means stay well apart.
DEFAULT_STYLES = {
    TissueClass.NORMAL: ClassStyle(density=5.0, radius_range=(2.0, 4.0),
                                   background=(238, 204, 218), foreground=(128, 80, 160)),
    TissueClass.BENIGN: ClassStyle(density=11.0, radius_range=(3.0, 5.0),
                                   background=(224, 186, 206), foreground=(112, 66, 150)),
    TissueClass.IN_SITU: ClassStyle(density=18.0, radius_range=(3.5, 7.0),
                                    background=(210, 170, 198), foreground=(96, 52, 142)),
    TissueClass.INVASIVE: ClassStyle(density=28.0, radius_range=(2.5, 6.0),
                                     background=(194, 156, 194), foreground=(80, 40, 132)),
}


@dataclass(frozen=True)
class SynthConfig:
    slices_per_class: int = 20
    slice_width: int = 512
    slice_height: int = 384
    patch_side: int = 128
    seed: int = 0
    image_format: str = 'png'
    styles: dict = field(default_factory=lambda: dict(DEFAULT_STYLES))

    def __post_init__(self):
        if self.slices_per_class < 1:
            raise ConfigError(f"slices_per_class must be >= 1, got {self.slices_per_class}")
        if self.image_format not in ('png', 'ppm'):
            raise ConfigError(f"image_format must be 'png' or 'ppm', got '{self.image_format}'")
        if set(self.styles) != set(TissueClass):
            raise ConfigError("A style is required for every tissue class")
        try:
            TilingService.tile_grid(self.slice_width, self.slice_height, self.patch_side)
        except (OddPatchSide, PatchTooLarge) as e:
            raise ConfigError(str(e)) from e

    @property
    def grid(self) -> tuple:
        return TilingService.tile_grid(self.slice_width, self.slice_height, self.patch_side)

    @property
    def patches_per_slice(self) -> int:
        rows, cols = self.grid
        return rows * cols

    @property
    def total_slices(self) -> int:
        return self.slices_per_class * len(TissueClass)
