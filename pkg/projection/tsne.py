"""
Exact t-SNE.

Input affinities are Gaussian conditionals calibrated per point to a
target perplexity and symmetrized into joint probabilities; the layout is
fitted by gradient descent on KL(P || Q) with a Student-t Q, momentum,
per-coordinate gains and early exaggeration. Everything is O(N^2).
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from dupless.exceptions import ConfigError
from embeddings.vectors import EmbeddingVector

from .exceptions import DegenerateDistances, InvalidAffinities, NonFiniteGradient, PerplexityTooLarge

logger = logging.getLogger(__name__)

PERPLEXITY_TOLERANCE = 1e-4
MAX_SEARCH_STEPS = 100
MIN_GAIN = 0.01


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    output_dim: int = 2
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iterations: int = 250
    momentum: float = 0.5
    final_momentum: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not self.perplexity > 1:
            raise ConfigError(f"perplexity must be > 1, got {self.perplexity}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.output_dim < 1:
            raise ConfigError(f"output_dim must be >= 1, got {self.output_dim}")


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Symmetric joint probabilities p_ij with a zero diagonal, summing to 1"""
    joint: np.ndarray
    conditional: np.ndarray = None
    perplexity: float = float('nan')

    def __post_init__(self):
        joint = np.array(self.joint, dtype=np.float64)
        n = joint.shape[0]
        if joint.ndim != 2 or joint.shape != (n, n):
            raise InvalidAffinities(f"Affinity matrix must be square, got {joint.shape}")
        if np.any(np.diag(joint) != 0) or np.any(joint < 0) or not np.array_equal(joint, joint.T):
            raise InvalidAffinities("Affinities must be symmetric, non-negative, with a zero diagonal")
        if abs(joint.sum() - 1.0) > 1e-9:
            raise InvalidAffinities(f"Affinities sum to {joint.sum()}, expected 1")
        joint.setflags(write=False)
        object.__setattr__(self, 'joint', joint)

    @property
    def size(self) -> int:
        return self.joint.shape[0]

    def row_perplexities(self) -> np.ndarray:
        """2^H of each conditional row, in bits"""
        rows = self.conditional
        with np.errstate(divide='ignore', invalid='ignore'):
            terms = np.where(rows > 0, rows * np.log2(rows), 0.0)
        return 2.0 ** (-terms.sum(axis=1))


@dataclass
class TsneResult:
    layout: np.ndarray
    kl_log: list = field(default_factory=list)


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, np.ndarray):
        return np.array(X, dtype=np.float64, ndmin=2)
    return np.array([x.values if isinstance(x, EmbeddingVector) else x for x in X], dtype=np.float64)


def _calibrate_row(distances, target_entropy):
    """Binary search on the Gaussian precision; returns (row, perplexity reached)"""
    shifted = distances - distances.min()
    beta, low, high = 1.0, 0.0, math.inf
    target = math.exp(target_entropy)
    for _ in range(MAX_SEARCH_STEPS):
        weights = np.exp(-shifted * beta)
        total = weights.sum()
        entropy = math.log(total) + beta * float(shifted @ weights) / total
        if abs(math.exp(entropy) - target) <= PERPLEXITY_TOLERANCE:
            return weights / total, True
        if entropy > target_entropy:
            low = beta
            beta = beta * 2 if math.isinf(high) else (beta + high) / 2
        else:
            high = beta
            beta = (beta + low) / 2
    return weights / total, False


def compute_affinities(X, perplexity: float) -> AffinityMatrix:
    X = _as_matrix(X)
    n = X.shape[0]
    if n < 3:
        raise PerplexityTooLarge(f"t-SNE needs at least 3 points, got {n}")
    if not 1 < perplexity < n:
        raise PerplexityTooLarge(f"Perplexity {perplexity} must lie strictly between 1 and N={n}")

    distances = squareform(pdist(X, 'sqeuclidean'))
    if not distances.any():
        raise DegenerateDistances(f"All {n} points coincide")

    conditional = np.zeros((n, n))
    target_entropy = math.log(perplexity)
    missed = 0
    for i in range(n):
        others = np.arange(n) != i
        row, reached = _calibrate_row(distances[i, others], target_entropy)
        conditional[i, others] = row
        missed += not reached
    if missed:
        logger.warning(f"Perplexity {perplexity} not reached within {PERPLEXITY_TOLERANCE} for {missed}/{n} points")

    joint = (conditional + conditional.T) / (2 * n)
    return AffinityMatrix(joint=joint, conditional=conditional, perplexity=perplexity)


def student_t_affinities(Y):
    """Return (Q, kernel) for a layout, with kernel_ij = 1 / (1 + |y_i - y_j|^2) off the diagonal"""
    kernel = 1.0 / (1.0 + squareform(pdist(Y, 'sqeuclidean')))
    np.fill_diagonal(kernel, 0.0)
    return kernel / kernel.sum(), kernel


def kl_divergence(P, Y) -> float:
    joint = P.joint if isinstance(P, AffinityMatrix) else np.asarray(P)
    Q, _ = student_t_affinities(np.asarray(Y, dtype=np.float64))
    mask = joint > 0
    return float((joint[mask] * np.log(joint[mask] / Q[mask])).sum())


def tsne_gradient(P, Y, exaggeration=1.0) -> np.ndarray:
    """dC/dy_i = 4 sum_j (e * p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j)"""
    joint = P.joint if isinstance(P, AffinityMatrix) else np.asarray(P)
    Y = np.asarray(Y, dtype=np.float64)
    Q, kernel = student_t_affinities(Y)
    weights = (exaggeration * joint - Q) * kernel
    return 4.0 * (weights.sum(axis=1)[:, None] * Y - weights @ Y)


def run_tsne(P: AffinityMatrix, config: TsneConfig) -> TsneResult:
    n = P.size
    rng = np.random.default_rng(config.seed)
    Y = rng.normal(0.0, 1e-4, size=(n, config.output_dim))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    result = TsneResult(layout=Y)

    logger.info(f"Running t-SNE on {n} points for {config.iterations} iterations")
    for iteration in range(config.iterations):
        early = iteration < config.exaggeration_iterations
        exaggeration = config.early_exaggeration if early else 1.0
        momentum = config.momentum if early else config.final_momentum

        grad = tsne_gradient(P, Y, exaggeration)
        if not np.isfinite(grad).all():
            raise NonFiniteGradient(f"t-SNE gradient became non-finite at iteration {iteration}")

        same_sign = (grad > 0) == (velocity > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        velocity = momentum * velocity - config.learning_rate * gains * grad
        Y = Y + velocity
        Y -= Y.mean(axis=0)

        kl = kl_divergence(P, Y)
        result.kl_log.append(kl)
        logger.debug(f"t-SNE iteration {iteration}: KL {kl:.6f}")
        if (iteration + 1) % 100 == 0:
            logger.info(f"t-SNE iteration {iteration + 1}/{config.iterations}: KL {kl:.4f}")

    result.layout = Y
    return result
