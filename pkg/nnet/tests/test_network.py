import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from dupless.exceptions import ConfigError
from imagecore.rasters import PatchImage
from nnet import layers
from nnet.exceptions import EmptyDataset, InvalidParamsFile, LabelOutOfRange, ShapeMismatch
from nnet.gradcheck import check_loss_gradients, numeric_gradient, relative_error
from nnet.network import (NetworkParams, NetworkSpec, extract_embedding, extract_embeddings, forward,
                          loss_and_grad)
from nnet.optim import Adam, SGD
from nnet.serialization import load_params, save_params
from nnet.training import TrainConfig, train_pretext
from pretext.services import DuplicationService

TINY = NetworkSpec(input_side=8, block_channels=(3, 4), num_classes=7)


def random_batch(n=2, side=8, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, size=(n, 3, side, side)).astype(np.float32)


class LayerGradientTests(SimpleTestCase):
    """Each layer against central differences of sum(output * R)"""

    def setUp(self):
        self.rng = np.random.default_rng(42)

    def assertGradClose(self, analytic, numeric):
        self.assertLessEqual(float(relative_error(analytic, numeric).max()), 1e-3)

    def test_conv(self):
        x = self.rng.normal(size=(2, 3, 5, 5))
        w = self.rng.normal(size=(4, 3, 3, 3))
        b = self.rng.normal(size=4)
        r = self.rng.normal(size=(2, 4, 5, 5))
        out, cache = layers.conv3x3_forward(x, w, b)
        dx, dw, db = layers.conv3x3_backward(r, cache)
        objective = lambda: float((layers.conv3x3_forward(x, w, b)[0] * r).sum())
        self.assertGradClose(dx, numeric_gradient(objective, x))
        self.assertGradClose(dw, numeric_gradient(objective, w))
        self.assertGradClose(db, numeric_gradient(objective, b))

    def test_relu(self):
        x = self.rng.normal(size=(2, 3, 4, 4))
        x[np.abs(x) < 0.01] = 0.5
        r = self.rng.normal(size=x.shape)
        _, mask = layers.relu_forward(x)
        objective = lambda: float((layers.relu_forward(x)[0] * r).sum())
        self.assertGradClose(layers.relu_backward(r, mask), numeric_gradient(objective, x))

    def test_maxpool(self):
        x = self.rng.permutation(2 * 2 * 4 * 4).reshape(2, 2, 4, 4).astype(np.float64) * 0.1
        r = self.rng.normal(size=(2, 2, 2, 2))
        _, cache = layers.maxpool2_forward(x)
        objective = lambda: float((layers.maxpool2_forward(x)[0] * r).sum())
        self.assertGradClose(layers.maxpool2_backward(r, cache), numeric_gradient(objective, x))

    def test_global_average_pool(self):
        x = self.rng.normal(size=(2, 3, 4, 4))
        r = self.rng.normal(size=(2, 3))
        _, shape = layers.global_avg_pool_forward(x)
        objective = lambda: float((layers.global_avg_pool_forward(x)[0] * r).sum())
        self.assertGradClose(layers.global_avg_pool_backward(r, shape), numeric_gradient(objective, x))

    def test_affine(self):
        x = self.rng.normal(size=(3, 5))
        w = self.rng.normal(size=(4, 5))
        b = self.rng.normal(size=4)
        r = self.rng.normal(size=(3, 4))
        _, cache = layers.affine_forward(x, w, b)
        dx, dw, db = layers.affine_backward(r, cache)
        objective = lambda: float((layers.affine_forward(x, w, b)[0] * r).sum())
        self.assertGradClose(dx, numeric_gradient(objective, x))
        self.assertGradClose(dw, numeric_gradient(objective, w))
        self.assertGradClose(db, numeric_gradient(objective, b))

    def test_softmax_cross_entropy(self):
        logits = self.rng.normal(size=(4, 7))
        labels = np.array([0, 3, 6, 2])
        _, dlogits = layers.softmax_cross_entropy(logits, labels)
        objective = lambda: float(layers.softmax_cross_entropy(logits, labels)[0])
        self.assertGradClose(dlogits, numeric_gradient(objective, logits))


class ForwardTests(SimpleTestCase):

    def test_zero_propagation(self):
        params = NetworkParams.zeros(TINY)
        params.tensors['head.bias'][:] = np.arange(7)
        logits, embedding = forward(params, np.zeros((2, 3, 8, 8), dtype=np.float32))
        self.assertTrue((embedding == 0).all())
        self.assertTrue(np.array_equal(logits, np.tile(np.arange(7, dtype=np.float32), (2, 1))))

    def test_identity_kernel(self):
        x = np.full((1, 1, 6, 6), 0.7)
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1
        out, _ = layers.conv3x3_forward(x, w, np.zeros(1))
        self.assertTrue(np.allclose(out, x))

    def test_softmax_rows_are_simplex(self):
        params = NetworkParams.initialize(TINY, seed=3)
        logits, embedding = forward(params, random_batch(5))
        probs = layers.softmax(logits.astype(np.float64))
        self.assertTrue((probs >= 0).all())
        self.assertTrue(np.allclose(probs.sum(axis=1), 1, atol=1e-6))
        self.assertEqual(embedding.shape, (5, TINY.embedding_dim))

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            forward(NetworkParams.zeros(TINY), random_batch(side=16))

    def test_spec_invariants(self):
        with self.assertRaises(ConfigError):
            NetworkSpec(input_side=12, block_channels=(8, 16, 32))
        self.assertEqual(NetworkSpec().embedding_dim, 64)


class LossTests(SimpleTestCase):

    def test_uniform_logits(self):
        params = NetworkParams.zeros(TINY)
        loss, _ = loss_and_grad(params, random_batch(3), [0, 4, 6])
        self.assertAlmostEqual(loss, math.log(7), places=5)

    def test_confident_correct_prediction(self):
        loss, _ = layers.softmax_cross_entropy(np.array([[1000.0, 0, 0], [0, 0, 1000.0]]), np.array([0, 2]))
        self.assertEqual(loss, 0.0)

    def test_label_out_of_range(self):
        with self.assertRaises(LabelOutOfRange):
            loss_and_grad(NetworkParams.zeros(TINY), random_batch(2), [0, 7])

    def test_full_network_matches_finite_differences(self):
        params = NetworkParams.initialize(TINY, seed=11)
        for name, value in params.items():
            if name.endswith('.bias'):
                value[:] = np.random.default_rng(5).normal(0, 0.1, size=value.shape)
        result = check_loss_gradients(params, random_batch(3, seed=2), [1, 5, 3], step=1e-4)
        self.assertLessEqual(result.max_relative_error, 1e-3)
        self.assertGreater(result.checked, 0.8 * (result.checked + result.skipped))

    def test_single_step_decreases_loss(self):
        params = NetworkParams.initialize(TINY, seed=4)
        batch, labels = random_batch(4, seed=9), [0, 1, 2, 3]
        before, grads = loss_and_grad(params.astype(np.float64), batch.astype(np.float64), labels)
        Adam(1e-5).step(params, grads.astype(np.float32))
        after, _ = loss_and_grad(params.astype(np.float64), batch.astype(np.float64), labels)
        self.assertLess(after, before)

    def test_sgd_step_moves_against_gradient(self):
        params = NetworkParams.initialize(TINY, seed=4)
        _, grads = loss_and_grad(params, random_batch(2), [0, 1])
        before = params.copy()
        SGD(0.5).step(params, grads)
        delta = params['head.weight'] - before['head.weight']
        self.assertTrue(np.allclose(delta, -0.5 * grads['head.weight'], atol=1e-6))


class SerializationTests(SimpleTestCase):

    def test_round_trip_is_bit_exact(self):
        params = NetworkParams.initialize(TINY, seed=8)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_params(params, Path(tmp) / 'params.nnp')
            self.assertTrue(path.read_bytes().startswith(b'NNP1'))
            loaded = load_params(path)
        self.assertTrue(loaded.equals(params))
        self.assertEqual(loaded.init, {'scheme': 'he-uniform-fan-in', 'seed': 8})

    def test_rejects_other_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bogus.nnp'
            path.write_bytes(b'NOPE')
            with self.assertRaises(InvalidParamsFile):
                load_params(path)


def synthetic_examples(count, side=8, seed=0):
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(count):
        patch = PatchImage(rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8),
                           slice_id=f"s{i}")
        examples.extend(DuplicationService.generate_pretext_examples(patch))
    return examples


class TrainingTests(SimpleTestCase):

    def test_config_invariants(self):
        with self.assertRaises(ConfigError):
            TrainConfig(epochs=0)
        with self.assertRaises(ConfigError):
            TrainConfig(batch_size=0)
        with self.assertRaises(ConfigError):
            TrainConfig(optimizer='rmsprop')

    def test_empty_dataset(self):
        with self.assertRaises(EmptyDataset):
            train_pretext(TINY, TrainConfig(epochs=1), [])

    def test_identical_seeds_give_identical_params(self):
        examples = synthetic_examples(3)
        config = TrainConfig(batch_size=4, learning_rate=0.01, epochs=2, seed=5)
        first = train_pretext(TINY, config, examples, holdout=examples[:7])
        second = train_pretext(TINY, config, examples, holdout=examples[:7])
        self.assertTrue(first.params.equals(second.params))
        self.assertEqual(len(first.log), 2)
        self.assertEqual([r.loss for r in first.log], [r.loss for r in second.log])
        self.assertTrue(0 <= first.final_holdout_accuracy <= 1)

    def test_training_log_csv(self):
        result = train_pretext(TINY, TrainConfig(batch_size=8, epochs=1, seed=1), synthetic_examples(2))
        with tempfile.TemporaryDirectory() as tmp:
            lines = result.write_log(Path(tmp) / 'log.csv').read_text().splitlines()
        self.assertEqual(lines[0], 'epoch,loss,accuracy,holdout_accuracy')
        self.assertEqual(len(lines), 2)


class EmbeddingExtractionTests(SimpleTestCase):

    def test_deterministic_and_sized(self):
        params = NetworkParams.initialize(TINY, seed=2)
        patch = PatchImage(np.random.default_rng(0).integers(0, 256, (8, 8, 3), dtype=np.uint8), slice_id='a')
        first = extract_embedding(params, patch)
        self.assertEqual(first, extract_embedding(params, patch))
        self.assertEqual(first.dim, TINY.embedding_dim)
        self.assertEqual(first.patch_id, 'a#r0c0')

    def test_zero_patch_zero_params(self):
        vector = extract_embedding(NetworkParams.zeros(TINY), PatchImage(np.zeros((8, 8, 3), np.uint8)))
        self.assertTrue((vector.values == 0).all())

    def test_batched_extraction_keeps_order(self):
        params = NetworkParams.initialize(TINY, seed=2)
        patches = [PatchImage(np.full((8, 8, 3), v, np.uint8), slice_id='s', tile_col=i)
                   for i, v in enumerate((0, 100, 200))]
        vectors = extract_embeddings(params, patches, batch_size=2)
        self.assertEqual([v.patch_id for v in vectors], ['s#r0c0', 's#r0c1', 's#r0c2'])

    def test_side_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            extract_embedding(NetworkParams.zeros(TINY), PatchImage(np.zeros((16, 16, 3), np.uint8)))
