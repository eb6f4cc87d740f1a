"""One-vs-rest decomposition over binary SVMs."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from embeddings.exceptions import DimMismatch

from .exceptions import SingleClassInput
from .svm import SvmConfig, as_matrix, train_binary_svm

logger = logging.getLogger(__name__)

ONE_VS_REST = 'one-vs-rest'


@dataclass(frozen=True)
class MulticlassModel:
    classes: tuple
    models: tuple
    strategy: str = ONE_VS_REST

    def __post_init__(self):
        object.__setattr__(self, 'classes', tuple(self.classes))
        object.__setattr__(self, 'models', tuple(self.models))
        if len(self.classes) != len(self.models):
            raise DimMismatch(f"{len(self.classes)} classes but {len(self.models)} binary models")

    @property
    def converged(self) -> bool:
        return all(model.converged for model in self.models)

    @property
    def dim(self) -> int:
        return self.models[0].dim

    def decision_matrix(self, X) -> np.ndarray:
        """(N, n_classes) per-class decision values, columns in ``classes`` order"""
        X = as_matrix(X)
        return np.column_stack([model.decision_values(X) for model in self.models])


def train_multiclass(X, labels, config: SvmConfig, workers=1, strict=False) -> MulticlassModel:
    """Train one binary model per class (class vs. rest), classes in sorted order"""
    X = as_matrix(X)
    labels = [int(label) for label in labels]
    if len(labels) != X.shape[0]:
        raise DimMismatch(f"{X.shape[0]} inputs but {len(labels)} labels")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise SingleClassInput(f"Multi-class SVM needs at least two classes, got {list(classes)}")

    target = np.asarray(labels)

    def fit(label):
        y = np.where(target == label, 1.0, -1.0)
        return train_binary_svm(X, y, config, positive_label=label, strict=strict)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        models = list(pool.map(fit, classes))

    model = MulticlassModel(classes, models)
    logger.info(
        f"Trained {ONE_VS_REST} SVM on {X.shape[0]} x {X.shape[1]} inputs: "
        f"support vectors {[m.n_support for m in models]}, converged={model.converged}"
    )
    return model


def predict(model: MulticlassModel, X):
    """Return (labels, decision matrix); argmax ties go to the lowest class index"""
    scores = model.decision_matrix(X)
    winners = np.argmax(scores, axis=1)
    return [model.classes[w] for w in winners], scores


def predict_one(model: MulticlassModel, x):
    return predict(model, [x])[0][0]
