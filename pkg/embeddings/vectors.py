from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import NonFiniteEmbedding


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    patch_id: str
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float32).reshape(-1)
        if not np.isfinite(values).all():
            raise NonFiniteEmbedding(f"Embedding for {self.patch_id} has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.patch_id == other.patch_id and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.patch_id, self.values.tobytes()))


class CombinationMethod(str, Enum):
    CONCAT = 'concat'
    SUM = 'sum'


@dataclass(frozen=True, eq=False)
class SliceEmbedding:
    slice_id: str
    method: CombinationMethod
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'method', CombinationMethod(self.method))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def as_vector(self) -> EmbeddingVector:
        """Slice vector keyed by slice id, for storage alongside patch vectors"""
        return EmbeddingVector(patch_id=self.slice_id, values=self.values)
