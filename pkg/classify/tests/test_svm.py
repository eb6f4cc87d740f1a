import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import minimize

from dupless.exceptions import ConfigError
from embeddings.exceptions import DimMismatch
from embeddings.vectors import EmbeddingVector

from classify.exceptions import NoConvergence, SingleClassInput
from classify.svm import KernelSpec, SvmConfig, SvmModel, decision_value, train_binary_svm


def oracle_dual(K, y, C):
    """Independent dual solve with SLSQP; returns (alpha, objective)"""
    Q = (y[:, None] * y[None, :]) * K
    n = len(y)
    result = minimize(
        lambda a: 0.5 * a @ Q @ a - a.sum(),
        np.zeros(n),
        jac=lambda a: Q @ a - 1.0,
        bounds=[(0.0, C)] * n,
        constraints=[{'type': 'eq', 'fun': lambda a: a @ y, 'jac': lambda a: y}],
        method='SLSQP',
        options={'ftol': 1e-14, 'maxiter': 2000},
    )
    return result.x, -result.fun


def model_dual(model):
    K = model.kernel.gram(model.support_vectors, model.support_vectors)
    return float(model.alphas.sum() - 0.5 * model.dual_coef @ K @ model.dual_coef)


def training_alphas(model, X):
    alphas = np.zeros(len(X))
    for row, coef in zip(model.support_vectors, model.dual_coef):
        alphas[np.flatnonzero((X == row).all(axis=1))] = abs(coef)
    return alphas


def probe_grid(dim):
    axes = [np.linspace(-2, 2, 5)] * dim
    return np.stack([g.reshape(-1) for g in np.meshgrid(*axes)], axis=1)


class KernelTests(SimpleTestCase):

    def test_rbf_needs_positive_gamma(self):
        with self.assertRaises(ConfigError):
            KernelSpec.rbf(0)
        with self.assertRaises(ConfigError):
            KernelSpec('poly')

    def test_config_invariants(self):
        with self.assertRaises(ConfigError):
            SvmConfig(C=0)
        with self.assertRaises(ConfigError):
            SvmConfig(tolerance=0)

    def test_rbf_self_similarity(self):
        x = np.array([[0.3, -1.2, 4.0]])
        self.assertEqual(KernelSpec.rbf(0.001).gram(x, x)[0, 0], 1.0)

    def test_support_vector_contributes_its_coefficient(self):
        model = SvmModel(support_vectors=[[1.0, 2.0]], dual_coef=[0.7], bias=0.0, kernel=KernelSpec.rbf(0.5))
        self.assertAlmostEqual(decision_value(model, np.array([1.0, 2.0])), 0.7, places=12)


class TwoPointTests(SimpleTestCase):

    def setUp(self):
        self.model = train_binary_svm([[-1.0], [1.0]], [-1, 1], SvmConfig(C=10, kernel=KernelSpec.linear()))

    def test_closed_form_solution(self):
        self.assertTrue(np.allclose(self.model.alphas, [0.5, 0.5], atol=1e-6))
        self.assertAlmostEqual(self.model.bias, 0.0, delta=1e-6)
        self.assertTrue(self.model.converged)

    def test_decision_function_is_identity(self):
        self.assertAlmostEqual(decision_value(self.model, [0.0]), 0.0, delta=1e-6)
        self.assertAlmostEqual(decision_value(self.model, [2.0]), 2.0, delta=1e-6)
        self.assertAlmostEqual(decision_value(self.model, EmbeddingVector('p', [-3.0])), -3.0, delta=1e-6)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimMismatch):
            decision_value(self.model, [1.0, 2.0])


class TrainingTests(SimpleTestCase):

    def test_single_class_input(self):
        with self.assertRaises(SingleClassInput):
            train_binary_svm([[0.0], [1.0]], [1, 1], SvmConfig())

    def test_xor_with_rbf(self):
        X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        y = np.array([-1, -1, 1, 1])
        model = train_binary_svm(X, y, SvmConfig(C=10, kernel=KernelSpec.rbf(0.5), tolerance=1e-8, max_passes=1000))
        self.assertTrue((np.sign(model.decision_values(X)) == y).all())
        self.assertEqual(model.n_support, 4)
        self.assertLess(np.ptp(model.alphas), 1e-4)

    def test_duplicated_points_give_same_decision_function(self):
        rng = np.random.default_rng(7)
        X = np.vstack([rng.normal([-2.0, 0.0], 0.3, size=(6, 2)), rng.normal([2.0, 0.0], 0.3, size=(6, 2))])
        y = np.repeat([-1, 1], 6)
        config = SvmConfig(C=10, tolerance=1e-10, max_passes=5000)
        single = train_binary_svm(X, y, config)
        double = train_binary_svm(np.vstack([X, X]), np.concatenate([y, y]), config)
        grid = probe_grid(2)
        self.assertTrue(np.allclose(single.decision_values(grid), double.decision_values(grid), atol=1e-6))

    def test_iteration_cap_flags_model(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 2))
        y = np.where(rng.random(20) < 0.5, -1, 1)
        y[:2] = [-1, 1]
        config = SvmConfig(C=10, kernel=KernelSpec.rbf(0.5), tolerance=1e-12, max_passes=1)
        model = train_binary_svm(X, y, config)
        self.assertFalse(model.converged)
        self.assertEqual(model.iterations, 20)
        with self.assertRaises(NoConvergence) as raised:
            train_binary_svm(X, y, config, strict=True)
        self.assertIsNotNone(raised.exception.model)
        self.assertEqual(raised.exception.exit_code, 3)


class OracleEquivalenceTests(SimpleTestCase):
    """SMO against an SLSQP dual solve on small random problems"""

    def test_random_problems(self):
        rng = np.random.default_rng(2021)
        for trial in range(100):
            n = int(rng.integers(2, 9))
            dim = int(rng.integers(1, 4))
            X = rng.normal(size=(n, dim))
            y = rng.permutation(np.resize([-1.0, 1.0], n))
            C = float(rng.choice([0.5, 1.0, 10.0]))
            kernel = KernelSpec.linear() if trial % 2 else KernelSpec.rbf(0.5)
            model = train_binary_svm(X, y, SvmConfig(C=C, kernel=kernel, tolerance=1e-6, max_passes=10000))

            with self.subTest(trial=trial):
                self.assertTrue(model.converged)
                alphas = training_alphas(model, X)
                self.assertTrue((alphas >= 0).all() and (alphas <= C + 1e-9).all())
                self.assertLessEqual(abs(model.dual_coef.sum()), 1e-9)

                margins = y * model.decision_values(X)
                at_zero = alphas <= 1e-9
                at_bound = alphas >= C - 1e-9
                free = ~at_zero & ~at_bound
                self.assertTrue((margins[at_zero] >= 1 - 1e-3).all())
                self.assertTrue((margins[at_bound] <= 1 + 1e-3).all())
                self.assertTrue((np.abs(margins[free] - 1) <= 1e-3).all())

                K = kernel.gram(X, X)
                oracle_alpha, oracle_objective = oracle_dual(K, y, C)
                self.assertAlmostEqual(model_dual(model), oracle_objective, delta=1e-3)

                oracle_free = (oracle_alpha > 1e-5 * C) & (oracle_alpha < C * (1 - 1e-5))
                if oracle_free.any():
                    f_train = K @ (oracle_alpha * y)
                    bias = float(np.mean(y[oracle_free] - f_train[oracle_free]))
                    grid = probe_grid(dim)
                    oracle_f = kernel.gram(grid, X) @ (oracle_alpha * y) + bias
                    clear = np.abs(oracle_f) > 0.05
                    ours = model.decision_values(grid)
                    self.assertTrue((np.sign(ours[clear]) == np.sign(oracle_f[clear])).all())
