"""
Slice-level train/test splitting.

Splits always assign whole slices, so every patch of a test slice stays
out of training. Both plans stratify by tissue class and are deterministic
from the plan seed.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from sklearn.model_selection import StratifiedKFold, train_test_split

from dupless.exceptions import ConfigError

from .exceptions import SplitLeakage, TooFewSlices

logger = logging.getLogger(__name__)


class SplitKind(str, Enum):
    HOLDOUT = 'holdout'
    KFOLD = 'kfold'


@dataclass(frozen=True)
class SplitPlan:
    kind: SplitKind = SplitKind.HOLDOUT
    seed: int = 0
    test_fraction: float = 0.25
    folds: int = 4
    stratified: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'kind', SplitKind(self.kind))
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")

    @classmethod
    def holdout(cls, seed=0, test_fraction=0.25) -> 'SplitPlan':
        return cls(SplitKind.HOLDOUT, seed=seed, test_fraction=test_fraction)

    @classmethod
    def kfold(cls, seed=0, folds=4) -> 'SplitPlan':
        return cls(SplitKind.KFOLD, seed=seed, folds=folds)

    @property
    def random_state(self) -> int:
        return self.seed % 2 ** 32

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'seed': self.seed, 'test_fraction': self.test_fraction,
                'folds': self.folds, 'stratified': self.stratified}


@dataclass(frozen=True)
class SplitFold:
    index: int
    train_ids: tuple
    test_ids: tuple


def assert_no_leakage(fold: SplitFold):
    overlap = set(fold.train_ids) & set(fold.test_ids)
    if overlap:
        raise SplitLeakage(f"Fold {fold.index}: {len(overlap)} slices on both sides, e.g. {sorted(overlap)[0]}")
    return fold


def make_split(manifest, plan: SplitPlan) -> list:
    """Hold-out returns one fold; k-fold returns ``plan.folds`` disjoint test folds covering every slice"""
    manifest.require_non_empty()
    records = sorted(manifest.slices, key=lambda record: record.slice_id)
    ids = [record.slice_id for record in records]
    labels = [int(record.label) for record in records]
    counts = Counter(labels)

    if plan.kind is SplitKind.HOLDOUT:
        if min(counts.values()) < 2:
            raise TooFewSlices(f"Hold-out split needs at least 2 slices per class, got {dict(sorted(counts.items()))}")
        if math.ceil(plan.test_fraction * len(ids)) < len(counts):
            raise TooFewSlices(f"A {plan.test_fraction:.0%} test set of {len(ids)} slices cannot hold every class")
        train, test = train_test_split(
            ids, test_size=plan.test_fraction, random_state=plan.random_state,
            stratify=labels if plan.stratified else None,
        )
        folds = [SplitFold(0, tuple(sorted(train)), tuple(sorted(test)))]
    else:
        if min(counts.values()) < plan.folds:
            raise TooFewSlices(
                f"{plan.folds}-fold split needs at least {plan.folds} slices per class, got {dict(sorted(counts.items()))}"
            )
        splitter = StratifiedKFold(n_splits=plan.folds, shuffle=True, random_state=plan.random_state)
        folds = [
            SplitFold(index, tuple(ids[i] for i in sorted(train)), tuple(ids[i] for i in sorted(test)))
            for index, (train, test) in enumerate(splitter.split(ids, labels))
        ]

    for fold in folds:
        assert_no_leakage(fold)
    logger.info(
        f"{plan.kind.value} split of {len(ids)} slices: "
        + ', '.join(f"fold {f.index} {len(f.train_ids)}/{len(f.test_ids)}" for f in folds)
    )
    return folds
