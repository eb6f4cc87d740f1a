"""
Soft-margin kernel SVM trained in the dual with SMO.

Variables are kept in signed form ``beta_i = y_i * alpha_i`` so every box
constraint reads ``A_i <= beta_i <= B_i`` and the equality constraint is
``sum(beta) = 0``. Each iteration updates the maximal violating pair
(working-set selection on the dual gradient) analytically, and training
stops once the pair's gradient gap drops below the tolerance. The full
Gram matrix is kept in memory.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from dupless.exceptions import ConfigError
from embeddings.exceptions import DimMismatch, NonFiniteEmbedding
from embeddings.vectors import EmbeddingVector

from .exceptions import NoConvergence, SingleClassInput

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-12


class KernelKind(str, Enum):
    LINEAR = 'linear'
    RBF = 'rbf'


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.LINEAR
    gamma: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', KernelKind(str(getattr(self.kind, 'value', self.kind)).lower()))
        except ValueError:
            raise ConfigError(f"Unknown kernel '{self.kind}', expected 'linear' or 'rbf'")
        if self.kind is KernelKind.RBF and not self.gamma > 0:
            raise ConfigError(f"RBF kernel needs gamma > 0, got {self.gamma}")

    @classmethod
    def linear(cls) -> 'KernelSpec':
        return cls(KernelKind.LINEAR)

    @classmethod
    def rbf(cls, gamma) -> 'KernelSpec':
        return cls(KernelKind.RBF, float(gamma))

    def gram(self, a, b) -> np.ndarray:
        """K(a_i, b_j) for every row pair"""
        cross = a @ b.T
        if self.kind is KernelKind.LINEAR:
            return cross
        squared = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2 * cross
        return np.exp(-self.gamma * np.maximum(squared, 0.0))

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'gamma': self.gamma}


@dataclass(frozen=True)
class SvmConfig:
    C: float = 10.0
    kernel: KernelSpec = field(default_factory=KernelSpec.linear)
    tolerance: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError(f"C must be > 0, got {self.C}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_passes < 1:
            raise ConfigError(f"max_passes must be >= 1, got {self.max_passes}")

    def to_dict(self) -> dict:
        return {'C': self.C, 'kernel': self.kernel.to_dict(),
                'tolerance': self.tolerance, 'max_passes': self.max_passes}


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Support vectors with their signed dual coefficients ``alpha_i * y_i``"""
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    kernel: KernelSpec
    positive_label: object = 1
    C: float = 10.0
    converged: bool = True
    iterations: int = 0
    n_train: int = 0

    def __post_init__(self):
        vectors = np.array(self.support_vectors, dtype=np.float64, ndmin=2)
        coef = np.array(self.dual_coef, dtype=np.float64).reshape(-1)
        if vectors.shape[0] != coef.shape[0]:
            raise DimMismatch(f"{vectors.shape[0]} support vectors but {coef.shape[0]} coefficients")
        vectors.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, 'support_vectors', vectors)
        object.__setattr__(self, 'dual_coef', coef)

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def n_support(self) -> int:
        return self.dual_coef.shape[0]

    @property
    def alphas(self) -> np.ndarray:
        return np.abs(self.dual_coef)

    def decision_values(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.dim:
            raise DimMismatch(f"Input dimension {X.shape[1]} does not match model dimension {self.dim}")
        if self.n_support == 0:
            return np.full(X.shape[0], self.bias)
        return self.kernel.gram(X, self.support_vectors) @ self.dual_coef + self.bias


def as_matrix(X) -> np.ndarray:
    """Stack embedding vectors (or rows of an array) into a finite float64 matrix"""
    if isinstance(X, np.ndarray):
        matrix = np.array(X, dtype=np.float64, ndmin=2)
    else:
        rows = [x.values if isinstance(x, EmbeddingVector) else np.asarray(x, dtype=np.float64).reshape(-1)
                for x in X]
        dims = {len(row) for row in rows}
        if len(dims) > 1:
            raise DimMismatch(f"Inputs have differing dimensions: {sorted(dims)}")
        matrix = np.array(rows, dtype=np.float64).reshape(len(rows), dims.pop() if dims else 0)
    if not np.isfinite(matrix).all():
        raise NonFiniteEmbedding("SVM input contains non-finite values")
    return matrix


def dual_objective(beta, y, K) -> float:
    """sum(alpha) - 1/2 alpha' Q alpha, written in signed coefficients"""
    return float(beta @ y - 0.5 * beta @ K @ beta)


def _solve_dual(K, y, C, tolerance, max_iterations):
    n = len(y)
    lower = np.where(y > 0, 0.0, -C)
    upper = np.where(y > 0, C, 0.0)
    beta = np.zeros(n)
    grad = y.astype(np.float64)
    diagonal = np.diag(K)

    iterations, converged = 0, False
    while True:
        up = beta < upper
        low = beta > lower
        i = int(np.argmax(np.where(up, grad, -np.inf)))
        j = int(np.argmin(np.where(low, grad, np.inf)))
        gap = grad[i] - grad[j]
        if not (up.any() and low.any()) or gap <= tolerance:
            converged = True
            break
        if iterations >= max_iterations:
            break
        curvature = max(diagonal[i] + diagonal[j] - 2 * K[i, j], CURVATURE_FLOOR)
        step = min(upper[i] - beta[i], beta[j] - lower[j], gap / curvature)
        beta[i] += step
        beta[j] -= step
        grad -= step * (K[i] - K[j])
        iterations += 1

    free = (beta > lower + 1e-12) & (beta < upper - 1e-12)
    if free.any():
        bias = float(grad[free].mean())
    else:
        up_max = grad[beta < upper].max(initial=-np.inf)
        low_min = grad[beta > lower].min(initial=np.inf)
        finite = [v for v in (up_max, low_min) if np.isfinite(v)]
        bias = float(np.mean(finite)) if finite else 0.0
    return beta, bias, converged, iterations


def train_binary_svm(X, y, config: SvmConfig, positive_label=1, strict=False) -> SvmModel:
    """Solve the soft-margin dual for +/-1 labels.

    A run that hits ``max_passes * n`` pair updates returns its best-so-far
    model with ``converged=False``; ``strict=True`` raises NoConvergence
    carrying that model instead.
    """
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise DimMismatch(f"{X.shape[0]} inputs but {y.shape[0]} labels")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ConfigError("Binary SVM labels must be +1 or -1")
    if not ((y > 0).any() and (y < 0).any()):
        raise SingleClassInput("Binary SVM needs at least one example of each sign")

    K = config.kernel.gram(X, X)
    beta, bias, converged, iterations = _solve_dual(
        K, y, config.C, config.tolerance, config.max_passes * len(y)
    )
    support = beta != 0
    model = SvmModel(
        support_vectors=X[support],
        dual_coef=beta[support],
        bias=bias,
        kernel=config.kernel,
        positive_label=positive_label,
        C=config.C,
        converged=converged,
        iterations=iterations,
        n_train=len(y),
    )
    if converged:
        logger.debug(f"SMO converged after {iterations} updates, {model.n_support}/{len(y)} support vectors")
    else:
        message = f"SMO stopped after {iterations} updates without reaching tolerance {config.tolerance}"
        if strict:
            raise NoConvergence(message, model=model)
        logger.warning(message)
    return model


def decision_value(model: SvmModel, x) -> float:
    """Signed margin f(x) = sum(alpha_i y_i K(x_i, x)) + b"""
    return float(model.decision_values([x])[0])
