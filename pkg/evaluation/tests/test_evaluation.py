import csv
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from embeddings.vectors import EmbeddingVector
from evaluation.exceptions import (EmptyEvaluation, InvalidManifest, LengthMismatch, MissingEmbeddings,
                                   SplitLeakage, TooFewSlices)
from evaluation.experiment import ExperimentService, ExperimentSettings
from evaluation.manifest import DatasetManifest, ManifestStore, PatchRecord, SliceRecord, TissueClass
from evaluation.metrics import SensitivityReport, compute_sensitivity, mean_report
from evaluation.reports import (comparison_table, slice_bar_data, write_comparison_table, write_reports_json,
                                write_slice_bars, write_summary_csv)
from evaluation.splits import SplitFold, SplitPlan, assert_no_leakage, make_split

N, B, S, I = TissueClass


def build_manifest(per_class, patches=0):
    slices = []
    for label in TissueClass:
        for index in range(per_class):
            slice_id = f"{label.label}_{index:03d}"
            records = tuple(PatchRecord(f"{slice_id}#r0c{col}", 0, col) for col in range(patches))
            slices.append(SliceRecord(slice_id, label, patches=records))
    return DatasetManifest(tuple(slices))


def clustered_embeddings(manifest, spread=0.05, seed=0, shuffle_labels=False):
    """One tight cluster per class in 8 dimensions; optionally drawn from a random class instead"""
    rng = np.random.default_rng(seed)
    centers = np.eye(4, 8) * 10.0
    vectors = {}
    for record in manifest.slices:
        label = int(rng.integers(4)) if shuffle_labels else int(record.label)
        for patch_id in record.patch_ids:
            vectors[patch_id] = EmbeddingVector(patch_id, centers[label] + rng.normal(0, spread, 8))
    return vectors


class ManifestTests(SimpleTestCase):

    def test_duplicate_ids_and_ragged_patches_rejected(self):
        with self.assertRaises(InvalidManifest):
            DatasetManifest((SliceRecord('a', N), SliceRecord('a', B)))
        with self.assertRaises(InvalidManifest):
            DatasetManifest((SliceRecord('a', N, patches=(PatchRecord('a#r0c0', 0, 0),)), SliceRecord('b', B)))

    def test_labels(self):
        self.assertIs(TissueClass.from_label('In-Situ'), I)
        self.assertEqual(TissueClass.IN_SITU.label, 'in-situ')
        with self.assertRaises(InvalidManifest):
            TissueClass.from_label('tumour')

    def test_save_and_load(self):
        manifest = build_manifest(2, patches=3)
        with tempfile.TemporaryDirectory() as tmp:
            ManifestStore.save(manifest, tmp)
            header = (Path(tmp) / 'manifest.csv').read_text().splitlines()[0]
            loaded = ManifestStore.load(Path(tmp) / 'manifest.csv')
        self.assertEqual(header, 'slice_id,label,path')
        self.assertEqual(loaded.slice_ids, manifest.slice_ids)
        self.assertEqual(loaded.labels, manifest.labels)
        self.assertEqual(loaded.patches_per_slice, 3)
        self.assertEqual(loaded.get('benign_001').patch_ids, manifest.get('benign_001').patch_ids)


class SplitTests(SimpleTestCase):

    def test_holdout_proportions(self):
        manifest = build_manifest(100)
        fold, = make_split(manifest, SplitPlan.holdout(seed=3))
        self.assertEqual((len(fold.train_ids), len(fold.test_ids)), (300, 100))
        labels = manifest.label_of()
        for label in TissueClass:
            self.assertEqual(sum(labels[s] == label for s in fold.test_ids), 25)

    def test_kfold_partitions_slices(self):
        manifest = build_manifest(100)
        folds = make_split(manifest, SplitPlan.kfold(seed=3))
        self.assertEqual(len(folds), 4)
        tested = [s for fold in folds for s in fold.test_ids]
        self.assertEqual(sorted(tested), sorted(manifest.slice_ids))
        for fold in folds:
            self.assertEqual(len(fold.test_ids), 100)
            self.assertFalse(set(fold.train_ids) & set(fold.test_ids))
            self.assertEqual(len(fold.train_ids) + len(fold.test_ids), 400)

    def test_deterministic_from_seed(self):
        manifest = build_manifest(8)
        self.assertEqual(make_split(manifest, SplitPlan.kfold(seed=9)), make_split(manifest, SplitPlan.kfold(seed=9)))
        self.assertNotEqual(make_split(manifest, SplitPlan.holdout(seed=1)),
                            make_split(manifest, SplitPlan.holdout(seed=2)))

    def test_seed_beyond_32_bits(self):
        manifest = build_manifest(4)
        self.assertEqual(make_split(manifest, SplitPlan.kfold(seed=2 ** 40 + 5)),
                         make_split(manifest, SplitPlan.kfold(seed=5)))

    def test_too_few_slices(self):
        with self.assertRaises(TooFewSlices):
            make_split(build_manifest(3), SplitPlan.kfold())
        with self.assertRaises(TooFewSlices):
            make_split(build_manifest(1), SplitPlan.holdout())

    def test_leakage_detected(self):
        with self.assertRaises(SplitLeakage):
            assert_no_leakage(SplitFold(0, ('a', 'b'), ('b',)))


class SensitivityTests(SimpleTestCase):

    def test_perfect_classifier(self):
        report = compute_sensitivity([N, B, S, I], [N, B, S, I])
        self.assertEqual(set(report.per_class.values()), {1.0})
        self.assertEqual(report.overall, 1.0)

    def test_direct_count(self):
        report = compute_sensitivity([N, N, B, B], [N, B, B, B])
        self.assertEqual(report.per_class[N], 0.5)
        self.assertEqual(report.per_class[B], 1.0)
        self.assertIsNone(report.per_class[S])
        self.assertEqual(report.overall, 0.75)
        self.assertEqual(report.total, 4)

    def test_constant_prediction(self):
        truth = [N, B, S, I] * 5
        report = compute_sensitivity(truth, [N] * 20)
        self.assertEqual(report.per_class[N], 1.0)
        self.assertEqual(report.per_class[I], 0.0)
        self.assertEqual(report.overall, 0.25)
        self.assertEqual(report.confusion[:, 0].tolist(), [5, 5, 5, 5])

    def test_macro_equals_accuracy_when_balanced(self):
        rng = np.random.default_rng(0)
        truth = np.repeat(np.arange(4), 10)
        predicted = rng.integers(0, 4, size=40)
        report = compute_sensitivity(truth, predicted)
        self.assertAlmostEqual(report.overall, float((truth == predicted).mean()), places=12)
        self.assertEqual(report.confusion.sum(axis=1).tolist(), [10, 10, 10, 10])

    def test_errors(self):
        with self.assertRaises(LengthMismatch):
            compute_sensitivity([N, B], [N])
        with self.assertRaises(EmptyEvaluation):
            compute_sensitivity([], [])

    def test_mean_report_uses_equal_fold_weights(self):
        first = compute_sensitivity([N, B], [N, B])
        second = compute_sensitivity([N, B, N, B], [B, B, B, B])
        mean = mean_report([first, second], method='concat')
        self.assertEqual(mean.overall, (1.0 + 0.5) / 2)
        self.assertEqual(mean.per_class[N], 0.5)
        self.assertEqual(mean.total, 6)
        restored = SensitivityReport.from_dict(mean.to_dict())
        self.assertEqual(mean_report(restored.folds, method='concat').overall, mean.overall)


class ExperimentTests(SimpleTestCase):

    def setUp(self):
        self.manifest = build_manifest(8, patches=4)
        self.settings = ExperimentSettings(holdout=SplitPlan.holdout(seed=1), kfold=SplitPlan.kfold(seed=1))

    def test_separable_fixture_is_classified_perfectly(self):
        result = ExperimentService.run_experiment(
            self.manifest, clustered_embeddings(self.manifest), 'S-Net-15', self.settings
        )
        self.assertEqual([r.method for r in result.reports], ['patch-svm', 'vote', 'concat', 'sum'])
        self.assertEqual([r.level for r in result.reports], ['patch', 'slice', 'slice', 'slice'])
        for report in result.reports:
            self.assertEqual(report.overall, 1.0, report.method)
        self.assertEqual(len(result.report('concat').folds), 4)
        self.assertEqual(result.report('vote').total, 8)
        self.assertEqual(result.report('patch-svm').total, 32)

    def test_shuffled_labels_fall_to_chance(self):
        manifest = build_manifest(25, patches=2)
        result = ExperimentService.run_experiment(
            manifest, clustered_embeddings(manifest, shuffle_labels=True, seed=4), 'shuffled', self.settings
        )
        # 99% binomial interval for 100 slices at p = 0.25 is roughly [0.14, 0.37]
        for method in ('concat', 'sum'):
            self.assertLess(abs(result.report(method).overall - 0.25), 0.12, method)

    def test_standardized_features(self):
        settings = ExperimentSettings(holdout=SplitPlan.holdout(seed=1), kfold=SplitPlan.kfold(seed=1),
                                      standardize=True)
        result = ExperimentService.run_experiment(
            self.manifest, clustered_embeddings(self.manifest), 'S-Net-10', settings
        )
        self.assertEqual(result.report('concat').overall, 1.0)

    def test_missing_embeddings(self):
        vectors = clustered_embeddings(self.manifest)
        vectors.pop(self.manifest.slices[0].patch_ids[0])
        with self.assertRaises(MissingEmbeddings):
            ExperimentService.run_experiment(self.manifest, vectors, 'x', self.settings)


class ReportTests(SimpleTestCase):

    def setUp(self):
        self.reports = [
            compute_sensitivity([N, B, S, I], [N, B, S, S], 'patch', 'patch-svm', 'S-Net-10'),
            compute_sensitivity([N, B, S, I], [N, B, S, I], 'slice', 'vote', 'S-Net-10'),
            mean_report([compute_sensitivity([N, B, S, I], [N, N, S, I])], 'slice', 'concat', 'S-Net-10'),
            mean_report([compute_sensitivity([N, B], [N, B])], 'slice', 'sum', 'S-Net-10'),
        ]

    def test_summary_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_summary_csv(self.reports, Path(tmp) / 'sensitivity.csv')
            with open(path, newline='') as f:
                rows = list(csv.DictReader(f))
        self.assertEqual(list(rows[0]), ['extractor', 'method', 'level', 'class', 'sensitivity'])
        self.assertEqual(len(rows), 4 * 5)
        overall = [r for r in rows if r['method'] == 'patch-svm' and r['class'] == 'overall'][0]
        self.assertEqual(overall['sensitivity'], '0.750000')
        absent = [r for r in rows if r['method'] == 'sum' and r['class'] == 'invasive'][0]
        self.assertEqual(absent['sensitivity'], '')

    def test_comparison_table_flags_missing_extractor(self):
        table = comparison_table(self.reports, absent_extractors=['P-Ext'])
        self.assertEqual(list(table.columns), ['normal', 'benign', 'in-situ', 'invasive', 'overall'])
        self.assertEqual(table.loc['S-Net-10', 'invasive'], '0.000000')
        self.assertEqual(table.loc['P-Ext', 'overall'], 'not provided')

    def test_slice_bar_data(self):
        table = slice_bar_data(self.reports)
        self.assertEqual(list(table.columns), ['vote', 'concat', 'sum'])
        self.assertEqual(table.loc[('S-Net-10', 'benign'), 'concat'], '0.000000')
        self.assertEqual(table.loc[('S-Net-10', 'overall'), 'vote'], '1.000000')

    def test_files_are_reproducible(self):
        with tempfile.TemporaryDirectory() as tmp:
            outputs = []
            for name in ('a', 'b'):
                folder = Path(tmp) / name
                folder.mkdir()
                write_reports_json(self.reports, folder / 'reports.json')
                write_comparison_table(self.reports, folder / 'table.csv')
                write_slice_bars(self.reports, folder / 'bars.csv')
                outputs.append([(folder / f).read_bytes() for f in ('reports.json', 'table.csv', 'bars.csv')])
        self.assertEqual(outputs[0], outputs[1])
        self.assertTrue(outputs[0][1].startswith(b'extractor,normal,benign,in-situ,invasive,overall\n'))
        self.assertFalse(math.isnan(self.reports[0].overall))
