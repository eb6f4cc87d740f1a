"""
Downstream evaluation protocol for one feature extractor.

- patch level: multi-class RBF SVM trained on the hold-out training
  slices' patches, scored on the test slices' patches
- majority vote: each test slice takes the modal class of its patch
  predictions (same hold-out split)
- concat / sum: slice vectors built from the patch embeddings, linear SVM
  under stratified k-fold cross-validation, mean of the fold reports
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.preprocessing import StandardScaler

from classify.multiclass import predict, train_multiclass
from classify.svm import KernelSpec, SvmConfig
from classify.voting import majority_vote
from embeddings.services import AggregationService
from embeddings.vectors import CombinationMethod

from .exceptions import MissingEmbeddings
from .metrics import compute_sensitivity, mean_report
from .splits import SplitPlan, make_split

logger = logging.getLogger(__name__)

PATCH_LEVEL = 'patch'
SLICE_LEVEL = 'slice'
PATCH_SVM = 'patch-svm'
VOTE = 'vote'


@dataclass(frozen=True)
class ExperimentSettings:
    patch_svm: SvmConfig = field(default_factory=lambda: SvmConfig(C=10.0, kernel=KernelSpec.rbf(0.001)))
    slice_svm: SvmConfig = field(default_factory=lambda: SvmConfig(C=10.0, kernel=KernelSpec.linear()))
    holdout: SplitPlan = field(default_factory=SplitPlan.holdout)
    kfold: SplitPlan = field(default_factory=SplitPlan.kfold)
    standardize: bool = False
    workers: int = 1


@dataclass
class ExperimentResult:
    extractor: str
    reports: list = field(default_factory=list)
    votes: dict = field(default_factory=dict)

    def report(self, method):
        for report in self.reports:
            if report.method == method:
                return report
        raise KeyError(method)


@dataclass
class FittedClassifier:
    """Multi-class model plus the scaler fitted on its training features"""
    model: object
    scaler: object = None

    def transform(self, X):
        return self.scaler.transform(X) if self.scaler is not None else X

    def scaler_to_dict(self):
        if self.scaler is None:
            return None
        return {'mean': self.scaler.mean_.tolist(), 'scale': self.scaler.scale_.tolist()}

    @staticmethod
    def scaler_from_dict(data):
        if not data:
            return None
        scaler = StandardScaler()
        scaler.mean_ = np.array(data['mean'])
        scaler.scale_ = np.array(data['scale'])
        scaler.var_ = scaler.scale_ ** 2
        scaler.n_features_in_ = len(scaler.mean_)
        return scaler


def _fit_scaler(train, standardize):
    if not standardize:
        return None
    return StandardScaler().fit(train)


class ExperimentService:
    """Runs the patch, vote and slice-level arms over one embedding source"""

    @staticmethod
    def check_embeddings(manifest, vectors_by_patch):
        missing = [pid for record in manifest.slices for pid in record.patch_ids if pid not in vectors_by_patch]
        if missing:
            raise MissingEmbeddings(f"{len(missing)} patches have no embedding, e.g. {missing[0]}")

    @staticmethod
    def patch_matrix(manifest, vectors_by_patch, slice_ids):
        """Rows for every patch of the given slices: (X, labels, owning slice id per row)"""
        rows, labels, owners = [], [], []
        for slice_id in slice_ids:
            record = manifest.get(slice_id)
            for patch_id in record.patch_ids:
                rows.append(vectors_by_patch[patch_id].values)
                labels.append(int(record.label))
                owners.append(slice_id)
        return np.array(rows, dtype=np.float64), labels, owners

    @staticmethod
    def slice_matrix(manifest, vectors_by_patch, slice_ids, method):
        subset = manifest.subset(slice_ids)
        by_id = {s.slice_id: s for s in AggregationService.aggregate_manifest(subset, vectors_by_patch, method)}
        X = np.array([by_id[slice_id].values for slice_id in slice_ids], dtype=np.float64)
        labels = [int(manifest.get(slice_id).label) for slice_id in slice_ids]
        return X, labels

    @staticmethod
    def train_patch_classifier(manifest, vectors_by_patch, fold, settings: ExperimentSettings) -> FittedClassifier:
        X, labels, _ = ExperimentService.patch_matrix(manifest, vectors_by_patch, fold.train_ids)
        scaler = _fit_scaler(X, settings.standardize)
        if scaler is not None:
            X = scaler.transform(X)
        logger.info(f"Training patch-level SVM on {len(labels)} patches from {len(fold.train_ids)} slices")
        model = train_multiclass(X, labels, settings.patch_svm, workers=settings.workers)
        return FittedClassifier(model, scaler)

    @staticmethod
    def evaluate_patch_level(classifier: FittedClassifier, manifest, vectors_by_patch, fold, extractor=''):
        """Return (patch report, vote report, slice id -> voted class) on the fold's test slices"""
        X, truth, owners = ExperimentService.patch_matrix(manifest, vectors_by_patch, fold.test_ids)
        predicted, scores = predict(classifier.model, classifier.transform(X))
        patch_report = compute_sensitivity(truth, predicted, PATCH_LEVEL, PATCH_SVM, extractor)

        owners = np.array(owners)
        votes = {}
        for slice_id in fold.test_ids:
            rows = np.flatnonzero(owners == slice_id)
            votes[slice_id] = majority_vote([predicted[r] for r in rows], scores[rows],
                                            classes=classifier.model.classes)
        slice_truth = [int(manifest.get(slice_id).label) for slice_id in fold.test_ids]
        vote_report = compute_sensitivity(slice_truth, [votes[s] for s in fold.test_ids],
                                          SLICE_LEVEL, VOTE, extractor)
        return patch_report, vote_report, votes

    @staticmethod
    def train_slice_classifier(manifest, vectors_by_patch, slice_ids, method, settings: ExperimentSettings):
        X, labels = ExperimentService.slice_matrix(manifest, vectors_by_patch, slice_ids, method)
        scaler = _fit_scaler(X, settings.standardize)
        if scaler is not None:
            X = scaler.transform(X)
        model = train_multiclass(X, labels, settings.slice_svm, workers=settings.workers)
        return FittedClassifier(model, scaler)

    @staticmethod
    def cross_validate_slices(manifest, vectors_by_patch, method, settings: ExperimentSettings, extractor=''):
        """Mean of the per-fold slice-level reports, folds attached"""
        method = CombinationMethod(method)
        fold_reports = []
        for fold in make_split(manifest, settings.kfold):
            classifier = ExperimentService.train_slice_classifier(
                manifest, vectors_by_patch, fold.train_ids, method, settings
            )
            X, truth = ExperimentService.slice_matrix(manifest, vectors_by_patch, fold.test_ids, method)
            predicted, _ = predict(classifier.model, classifier.transform(X))
            report = compute_sensitivity(truth, predicted, SLICE_LEVEL, method.value, extractor)
            logger.info(f"{extractor} {method.value} fold {fold.index}: overall sensitivity {report.overall:.3f}")
            fold_reports.append(report)
        return mean_report(fold_reports, SLICE_LEVEL, method.value, extractor)

    @staticmethod
    def run_experiment(manifest, vectors_by_patch, extractor='', settings=None) -> ExperimentResult:
        """All four arms; reports come back as patch-svm, vote, concat, sum"""
        settings = settings or ExperimentSettings()
        manifest.require_non_empty()
        ExperimentService.check_embeddings(manifest, vectors_by_patch)

        holdout = make_split(manifest, settings.holdout)[0]
        classifier = ExperimentService.train_patch_classifier(manifest, vectors_by_patch, holdout, settings)
        patch_report, vote_report, votes = ExperimentService.evaluate_patch_level(
            classifier, manifest, vectors_by_patch, holdout, extractor
        )
        result = ExperimentResult(extractor=extractor, reports=[patch_report, vote_report], votes=votes)
        for method in CombinationMethod:
            result.reports.append(
                ExperimentService.cross_validate_slices(manifest, vectors_by_patch, method, settings, extractor)
            )
        logger.info(
            f"{extractor}: " + ', '.join(f"{r.method} {r.overall:.3f}" for r in result.reports)
        )
        return result
