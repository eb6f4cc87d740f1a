import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from embeddings.exceptions import BadMagic, DimMismatch, EmptyList, IndexMismatch, TruncatedFile
from embeddings.formats import EmbeddingStore, index_path_for
from embeddings.services import AggregationService
from embeddings.vectors import CombinationMethod, EmbeddingVector


def vectors(count, dim, seed=0):
    rng = np.random.default_rng(seed)
    return [EmbeddingVector(f"s#r{i // 4}c{i % 4}", rng.normal(size=dim)) for i in range(count)]


class AggregationTests(SimpleTestCase):

    def test_concat_of_twelve_patches_length(self):
        out = AggregationService.concat_embeddings(vectors(12, 1024), slice_id='s')
        self.assertEqual(out.dim, 12288)
        self.assertEqual(out.method, CombinationMethod.CONCAT)

    def test_concat_desk_length(self):
        self.assertEqual(AggregationService.concat_embeddings(vectors(12, 64)).dim, 768)

    def test_concat_single_is_identity(self):
        (v,) = vectors(1, 5)
        self.assertTrue(np.array_equal(AggregationService.concat_embeddings([v]).values, v.values))

    def test_concat_is_order_sensitive(self):
        items = vectors(3, 2)
        forward = AggregationService.concat_embeddings(items).values.reshape(3, 2)
        backward = AggregationService.concat_embeddings(items[::-1]).values.reshape(3, 2)
        self.assertTrue(np.array_equal(forward, backward[::-1]))

    def test_sum_additive_identity(self):
        items = vectors(5, 8)
        zero = EmbeddingVector('z', np.zeros(8))
        self.assertTrue(np.array_equal(AggregationService.sum_embeddings(items).values,
                                       AggregationService.sum_embeddings(items + [zero]).values))

    def test_sum_is_order_invariant(self):
        items = vectors(12, 16, seed=3)
        rng = np.random.default_rng(9)
        reference = AggregationService.sum_embeddings(items).values
        for _ in range(10):
            shuffled = [items[i] for i in rng.permutation(len(items))]
            self.assertTrue(np.array_equal(AggregationService.sum_embeddings(shuffled).values, reference))
        self.assertEqual(reference.shape, (16,))

    def test_sum_of_copies_scales(self):
        v = EmbeddingVector('v', [0.5, -1.0, 2.0])
        out = AggregationService.sum_embeddings([v] * 12)
        self.assertTrue(np.allclose(out.values, 12 * v.values.astype(np.float64)))

    def test_errors(self):
        with self.assertRaises(EmptyList):
            AggregationService.concat_embeddings([])
        with self.assertRaises(EmptyList):
            AggregationService.sum_embeddings([])
        with self.assertRaises(DimMismatch):
            AggregationService.sum_embeddings([EmbeddingVector('a', [1, 2]), EmbeddingVector('b', [1, 2, 3])])


class EmbeddingStoreTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_known_bytes_round_trip(self):
        values = np.arange(12, dtype='<f4').reshape(3, 4) / 7
        path = self.dir / 'ext.emb1'
        path.write_bytes(struct.pack('<4sII', b'EMB1', 3, 4) + values.tobytes())
        index_path_for(path).write_text('row,patch_id\n0,a#r0c0\n1,a#r0c1\n2,a#r0c2\n')
        loaded = EmbeddingStore.import_embeddings(path)
        self.assertEqual([v.patch_id for v in loaded], ['a#r0c0', 'a#r0c1', 'a#r0c2'])
        self.assertTrue(np.array_equal(np.stack([v.values for v in loaded]), values))

    def test_export_import_bit_exact(self):
        items = vectors(8, 6, seed=2)
        path = EmbeddingStore.export_embeddings(items, self.dir / 'out.emb1')
        self.assertEqual(EmbeddingStore.import_embeddings(path), items)
        again = EmbeddingStore.export_embeddings(EmbeddingStore.import_embeddings(path), self.dir / 'again.emb1')
        self.assertEqual(again.read_bytes(), path.read_bytes())

    def test_empty_payload(self):
        path = EmbeddingStore.export_embeddings([], self.dir / 'empty.emb1')
        self.assertEqual(EmbeddingStore.import_embeddings(path), [])

    def test_empty_payload_without_index(self):
        path = self.dir / 'bare.emb1'
        path.write_bytes(struct.pack('<4sII', b'EMB1', 0, 16))
        self.assertEqual(EmbeddingStore.import_embeddings(path), [])

    def test_missing_index_with_payload(self):
        path = EmbeddingStore.export_embeddings(vectors(2, 3), self.dir / 'y.emb1')
        index_path_for(path).unlink()
        with self.assertRaisesMessage(IndexMismatch, 'not found'):
            EmbeddingStore.import_embeddings(path)

    def test_truncated(self):
        path = self.dir / 'short.emb1'
        path.write_bytes(struct.pack('<4sII', b'EMB1', 3, 4) + b'\x00' * 40)
        index_path_for(path).write_text('row,patch_id\n0,a\n1,b\n2,c\n')
        with self.assertRaises(TruncatedFile):
            EmbeddingStore.import_embeddings(path)

    def test_bad_magic(self):
        path = self.dir / 'bad.emb1'
        path.write_bytes(struct.pack('<4sII', b'EMB2', 0, 0))
        with self.assertRaises(BadMagic):
            EmbeddingStore.import_embeddings(path)

    def test_index_mismatch(self):
        path = EmbeddingStore.export_embeddings(vectors(2, 3), self.dir / 'x.emb1')
        index_path_for(path).write_text('row,patch_id\n0,a\n')
        with self.assertRaises(IndexMismatch):
            EmbeddingStore.import_embeddings(path)

    def test_plain_csv(self):
        path = self.dir / 'ext.csv'
        path.write_text('patch_id,v0,v1\np#r0c0,0.5,1.5\np#r0c1,-2,3\n')
        loaded = EmbeddingStore.import_embeddings(path)
        self.assertEqual(loaded[1].patch_id, 'p#r0c1')
        self.assertTrue(np.array_equal(loaded[1].values, np.array([-2, 3], dtype=np.float32)))
