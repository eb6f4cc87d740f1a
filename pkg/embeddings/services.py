import logging

import numpy as np

from .exceptions import DimMismatch, EmptyList
from .vectors import CombinationMethod, SliceEmbedding

logger = logging.getLogger(__name__)


class AggregationService:
    """Combines the patch embeddings of one slice into a slice vector"""

    @staticmethod
    def _stack(patches):
        if not patches:
            raise EmptyList("Cannot aggregate an empty list of embeddings")
        dims = {vector.dim for vector in patches}
        if len(dims) > 1:
            raise DimMismatch(f"Embeddings have differing dimensions: {sorted(dims)}")
        return np.stack([vector.values for vector in patches]).astype(np.float64)

    @staticmethod
    def concat_embeddings(patches, slice_id='') -> SliceEmbedding:
        """Concatenate in the given (row-major patch) order"""
        stacked = AggregationService._stack(patches)
        return SliceEmbedding(slice_id, CombinationMethod.CONCAT, stacked.reshape(-1))

    @staticmethod
    def sum_embeddings(patches, slice_id='') -> SliceEmbedding:
        """Element-wise sum; each column is summed in sorted order so the result ignores input order"""
        stacked = AggregationService._stack(patches)
        return SliceEmbedding(slice_id, CombinationMethod.SUM, np.sort(stacked, axis=0).sum(axis=0))

    @staticmethod
    def combine(patches, method, slice_id='') -> SliceEmbedding:
        method = CombinationMethod(method)
        if method is CombinationMethod.CONCAT:
            return AggregationService.concat_embeddings(patches, slice_id)
        return AggregationService.sum_embeddings(patches, slice_id)

    @staticmethod
    def aggregate_manifest(manifest, vectors_by_patch, method) -> list:
        """One slice embedding per manifest slice, patches taken in row-major order"""
        from evaluation.exceptions import MissingEmbeddings

        slices = []
        for record in manifest.slices:
            missing = [pid for pid in record.patch_ids if pid not in vectors_by_patch]
            if missing:
                raise MissingEmbeddings(
                    f"Slice {record.slice_id}: no embedding for {len(missing)} patches (e.g. {missing[0]})"
                )
            patches = [vectors_by_patch[pid] for pid in record.patch_ids]
            slices.append(AggregationService.combine(patches, method, record.slice_id))
        logger.info(f"Aggregated {len(slices)} slices with method '{CombinationMethod(method).value}'")
        return slices
