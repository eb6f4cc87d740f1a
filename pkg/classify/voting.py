import logging
from collections import Counter

import numpy as np

from embeddings.exceptions import DimMismatch, EmptyList

logger = logging.getLogger(__name__)


def majority_vote(predictions, decision_values=None, classes=None):
    """Modal class of a slice's patch predictions.

    Ties go to the tied class with the highest mean decision value, then to
    the lowest class. ``decision_values`` is an (n_patches, n_classes)
    matrix whose columns follow ``classes`` (default ``0..n_classes-1``).
    """
    predictions = list(predictions)
    if not predictions:
        raise EmptyList("Cannot vote over an empty prediction list")

    counts = Counter(predictions)
    top = max(counts.values())
    tied = sorted(label for label, count in counts.items() if count == top)
    if len(tied) == 1 or decision_values is None:
        return tied[0]

    scores = np.asarray(decision_values, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != len(predictions):
        raise DimMismatch(f"Decision matrix {scores.shape} does not cover {len(predictions)} predictions")
    columns = list(classes) if classes is not None else list(range(scores.shape[1]))
    means = scores.mean(axis=0)
    best = max(tied, key=lambda label: (means[columns.index(label)], -tied.index(label)))
    logger.debug(f"Vote tie between {tied} at {top} patches each, resolved to {best}")
    return best
