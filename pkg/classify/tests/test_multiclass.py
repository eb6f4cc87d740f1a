import tempfile
from itertools import permutations
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from embeddings.exceptions import EmptyList

from classify.exceptions import InvalidModelFile, SingleClassInput
from classify.model_io import load_model, model_summary, save_model, write_summary
from classify.multiclass import predict, predict_one, train_multiclass
from classify.svm import KernelSpec, SvmConfig, train_binary_svm
from classify.voting import majority_vote


def square_clusters(per_class=10, spread=0.2, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[-3, -3], [3, -3], [-3, 3], [3, 3]], dtype=float)
    X = np.vstack([rng.normal(center, spread, size=(per_class, 2)) for center in centers])
    labels = np.repeat(np.arange(4), per_class)
    return X, labels


class MulticlassTests(SimpleTestCase):

    def test_four_corner_clusters_are_fit_exactly(self):
        X, labels = square_clusters()
        model = train_multiclass(X, labels, SvmConfig(C=10, kernel=KernelSpec.linear()))
        predicted, scores = predict(model, X)
        self.assertEqual(predicted, list(labels))
        self.assertEqual(scores.shape, (40, 4))
        self.assertEqual(model.classes, (0, 1, 2, 3))
        self.assertEqual(len(model.models), 4)

    def test_worker_count_does_not_change_models(self):
        X, labels = square_clusters(per_class=5, seed=1)
        config = SvmConfig(C=10, kernel=KernelSpec.rbf(0.1))
        serial = train_multiclass(X, labels, config, workers=1)
        parallel = train_multiclass(X, labels, config, workers=4)
        self.assertTrue(np.array_equal(serial.decision_matrix(X), parallel.decision_matrix(X)))

    def test_two_classes_match_binary_prediction(self):
        X, labels = square_clusters(per_class=8)
        keep = labels < 2
        X, labels = X[keep], labels[keep]
        config = SvmConfig(C=10)
        model = train_multiclass(X, labels, config)
        binary = train_binary_svm(X, np.where(labels == 1, 1, -1), config)
        expected = [1 if v > 0 else 0 for v in binary.decision_values(X)]
        self.assertEqual(predict(model, X)[0], expected)
        self.assertEqual(predict_one(model, X[0]), expected[0])

    def test_argmax_survives_positive_rescaling(self):
        X, labels = square_clusters(per_class=4, seed=5)
        model = train_multiclass(X, labels, SvmConfig())
        _, scores = predict(model, X)
        self.assertTrue(np.array_equal(np.argmax(scores, axis=1), np.argmax(scores * 3.5, axis=1)))

    def test_single_class_input(self):
        with self.assertRaises(SingleClassInput):
            train_multiclass(np.zeros((3, 2)), [2, 2, 2], SvmConfig())


class MajorityVoteTests(SimpleTestCase):

    def test_strict_majority(self):
        self.assertEqual(majority_vote([3] * 7 + [1] * 5), 3)

    def test_unanimity(self):
        self.assertEqual(majority_vote([0] * 12), 0)

    def test_tie_resolved_by_mean_decision_value(self):
        predictions = [1] * 6 + [2] * 6
        scores = np.zeros((12, 4))
        scores[:, 1] = 0.2
        scores[:, 2] = 0.5
        self.assertEqual(majority_vote(predictions, scores), 2)

    def test_tie_without_scores_goes_to_lowest_class(self):
        self.assertEqual(majority_vote([2, 1, 2, 1]), 1)

    def test_tie_with_equal_scores_goes_to_lowest_class(self):
        self.assertEqual(majority_vote([3, 0], np.ones((2, 4))), 0)

    def test_permutation_invariance(self):
        predictions = [1, 2, 1, 2, 3]
        scores = np.random.default_rng(0).normal(size=(5, 4))
        expected = majority_vote(predictions, scores)
        for order in permutations(range(5)):
            order = list(order)
            self.assertEqual(majority_vote([predictions[i] for i in order], scores[order]), expected)

    def test_empty(self):
        with self.assertRaises(EmptyList):
            majority_vote([])


class ModelFileTests(SimpleTestCase):

    def setUp(self):
        X, labels = square_clusters(per_class=5, seed=2)
        self.X = X
        self.config = SvmConfig(C=10, kernel=KernelSpec.rbf(0.001))
        self.model = train_multiclass(X, labels, self.config)

    def test_round_trip_preserves_decisions(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_model(self.model, Path(tmp) / 'patch.svm')
            self.assertTrue(path.read_bytes().startswith(b'SVM1'))
            loaded = load_model(path)
        self.assertEqual(loaded.classes, self.model.classes)
        self.assertTrue(np.array_equal(loaded.decision_matrix(self.X), self.model.decision_matrix(self.X)))
        self.assertEqual(loaded.converged, self.model.converged)

    def test_rejects_foreign_and_truncated_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_model(self.model, Path(tmp) / 'patch.svm')
            path.write_bytes(path.read_bytes()[:-8])
            with self.assertRaises(InvalidModelFile):
                load_model(path)
            path.write_bytes(b'EMB1' + bytes(8))
            with self.assertRaises(InvalidModelFile):
                load_model(path)

    def test_summary(self):
        names = {0: 'normal', 1: 'benign', 2: 'in-situ', 3: 'invasive'}
        summary = model_summary(self.model, self.config, names)
        self.assertEqual(summary['classes'], ['normal', 'benign', 'in-situ', 'invasive'])
        self.assertEqual(summary['config']['kernel'], {'kind': 'rbf', 'gamma': 0.001})
        self.assertEqual(sum(summary['support_vectors'].values()),
                         sum(m.n_support for m in self.model.models))
        with tempfile.TemporaryDirectory() as tmp:
            self.assertTrue(write_summary(self.model, Path(tmp) / 's.json', self.config).exists())
