"""Per-class sensitivity (recall) with a macro-averaged overall score."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import confusion_matrix

from .exceptions import EmptyEvaluation, LengthMismatch
from .manifest import TissueClass

logger = logging.getLogger(__name__)

CLASSES = tuple(TissueClass)


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    """Confusion rows are true classes, columns predicted classes, both in TissueClass order.

    ``per_class`` holds None for a class absent from the truth; ``overall``
    averages the defined entries.
    """
    confusion: np.ndarray
    per_class: dict
    overall: float
    level: str = 'patch'
    method: str = ''
    extractor: str = ''
    folds: tuple = field(default_factory=tuple)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            'extractor': self.extractor,
            'method': self.method,
            'level': self.level,
            'overall': None if math.isnan(self.overall) else self.overall,
            'per_class': {c.label: self.per_class[c] for c in CLASSES},
            'confusion': self.confusion.tolist(),
            'folds': [fold.to_dict() for fold in self.folds],
        }

    @classmethod
    def from_dict(cls, data) -> 'SensitivityReport':
        return cls(
            confusion=np.array(data['confusion'], dtype=np.int64),
            per_class={TissueClass.from_label(k): v for k, v in data['per_class'].items()},
            overall=float('nan') if data['overall'] is None else data['overall'],
            level=data['level'],
            method=data['method'],
            extractor=data['extractor'],
            folds=tuple(cls.from_dict(fold) for fold in data.get('folds', [])),
        )


def _from_confusion(matrix, **tags) -> SensitivityReport:
    row_sums = matrix.sum(axis=1)
    per_class = {
        c: (float(matrix[c, c] / row_sums[c]) if row_sums[c] else None) for c in CLASSES
    }
    defined = [v for v in per_class.values() if v is not None]
    overall = float(np.mean(defined)) if defined else float('nan')
    return SensitivityReport(confusion=matrix, per_class=per_class, overall=overall, **tags)


def compute_sensitivity(truth, predicted, level='patch', method='', extractor='') -> SensitivityReport:
    truth = [int(t) for t in truth]
    predicted = [int(p) for p in predicted]
    if len(truth) != len(predicted):
        raise LengthMismatch(f"{len(truth)} true labels but {len(predicted)} predictions")
    if not truth:
        raise EmptyEvaluation("Cannot compute sensitivity over zero items")
    matrix = confusion_matrix(truth, predicted, labels=[int(c) for c in CLASSES]).astype(np.int64)
    return _from_confusion(matrix, level=level, method=method, extractor=extractor)


def mean_report(fold_reports, level='slice', method='', extractor='') -> SensitivityReport:
    """Equal-weight mean of fold sensitivities; confusion matrices are summed"""
    fold_reports = tuple(fold_reports)
    if not fold_reports:
        raise EmptyEvaluation("No fold reports to average")
    per_class = {}
    for c in CLASSES:
        values = [r.per_class[c] for r in fold_reports if r.per_class[c] is not None]
        per_class[c] = float(np.mean(values)) if values else None
    overall_values = [r.overall for r in fold_reports if not math.isnan(r.overall)]
    return SensitivityReport(
        confusion=sum(r.confusion for r in fold_reports),
        per_class=per_class,
        overall=float(np.mean(overall_values)) if overall_values else float('nan'),
        level=level,
        method=method,
        extractor=extractor,
        folds=fold_reports,
    )
