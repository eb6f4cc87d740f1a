"""
Pipeline stages.

Each stage reads the files written by the stages before it, writes its own
directory under ``output_dir`` through ``StageOutput`` and returns the
path of its main output. ``StageService.run_all`` chains them into the full
extractor x combination-method experiment.
"""
import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from classify.model_io import load_model, save_model, write_summary
from embeddings.exceptions import DimMismatch
from embeddings.formats import EmbeddingStore
from embeddings.services import AggregationService
from embeddings.vectors import CombinationMethod
from evaluation.experiment import ExperimentService, FittedClassifier
from evaluation.manifest import ManifestStore, PatchRecord, TissueClass
from evaluation.reports import (write_comparison_table, write_reports_json, write_slice_bars,
                                write_summary_csv)
from evaluation.splits import make_split
from imagecore.io import ImageIO
from imagecore.rasters import PatchImage
from imagecore.services import TilingService
from nnet.network import extract_embeddings
from nnet.serialization import load_params, save_params
from nnet.training import train_pretext
from pretext.services import DuplicationClass, DuplicationService, PretextDatasetWriter
from projection.exceptions import PerplexityTooLarge
from projection.scatter import write_scatter_csv, write_scatter_svg
from projection.tsne import compute_affinities, run_tsne
from synthgen.services import generate_dataset

from .artifacts import StageLayout, StageOutput
from .config import RunConfig
from .exceptions import MissingStageOutput

logger = logging.getLogger(__name__)

EMBEDDING_FILE = 'embeddings.emb'
PATCH_MODEL = 'patch'
CLASS_NAMES = {int(c): c.label for c in TissueClass}


class StageInputs:
    """Loaders for the files earlier stages leave behind"""

    @staticmethod
    def require(path, hint):
        path = Path(path)
        if not path.exists():
            raise MissingStageOutput(f"{path} not found; {hint}")
        return path

    @staticmethod
    def dataset_manifest_path(config: RunConfig, layout: StageLayout) -> Path:
        if config.dataset_manifest:
            return StageInputs.require(config.dataset_manifest, "check the dataset_manifest setting")
        return StageInputs.require(layout.synth / 'manifest.csv', "run the synth stage first")

    @staticmethod
    def tiled_manifest(layout: StageLayout):
        path = StageInputs.require(layout.tiles / 'manifest.csv', "run the tile stage first")
        return ManifestStore.load(path).require_non_empty()

    @staticmethod
    def read_patch(record, patch: PatchRecord) -> PatchImage:
        raster = ImageIO.read_image(patch.path)
        return PatchImage(raster.pixels, slice_id=record.slice_id, tile_row=patch.tile_row, tile_col=patch.tile_col)

    @staticmethod
    def read_patches(record) -> list:
        return [StageInputs.read_patch(record, patch) for patch in record.patches]

    @staticmethod
    def embeddings_path(layout: StageLayout, tag) -> Path:
        return StageInputs.require(layout.embeddings(tag) / EMBEDDING_FILE,
                                   f"no embeddings for extractor {tag}; run embed or import_embeddings first")

    @staticmethod
    def vectors_by_patch(layout: StageLayout, tag) -> dict:
        vectors = EmbeddingStore.import_embeddings(StageInputs.embeddings_path(layout, tag))
        return {vector.patch_id: vector for vector in vectors}

    @staticmethod
    def patch_classifier(layout: StageLayout, tag) -> FittedClassifier:
        directory = layout.svm(tag)
        model = load_model(StageInputs.require(directory / f"{PATCH_MODEL}.svm1", "run train_svm first"))
        with open(StageInputs.require(directory / f"{PATCH_MODEL}_scaler.json", "run train_svm first"),
                  'r', encoding='utf-8') as f:
            scaler = FittedClassifier.scaler_from_dict(json.load(f))
        return FittedClassifier(model, scaler)


def _parallel_map(fn, items, workers):
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(fn, items))


def _write_json(data, path) -> Path:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')
    return Path(path)


def _holdout_sources(examples, fraction, seed) -> set:
    """Source patch ids held out from pretext training; all 7 variants of a source go together"""
    sources = sorted({example.source_patch_id for example in examples})
    count = int(round(fraction * len(sources)))
    if fraction > 0 and len(sources) > 1:
        count = min(max(count, 1), len(sources) - 1)
    else:
        count = 0
    rng = np.random.default_rng(seed)
    return {sources[i] for i in rng.choice(len(sources), size=count, replace=False)}


def checked_perplexity(requested, n_points, name='') -> float:
    """The configured perplexity, unchanged; it must stay below the number of points"""
    if requested >= n_points:
        raise PerplexityTooLarge(
            f"{name or 'point set'}: perplexity {requested} needs more than {n_points} points; lower tsne_perplexity"
        )
    return requested


class StageService:
    """One method per pipeline stage"""

    @staticmethod
    def synth(config: RunConfig) -> Path:
        layout = StageLayout(config.output_dir)
        synth = config.synth_config()
        with StageOutput(layout, 'synth', layout.synth, config) as stage:
            manifest = generate_dataset(synth, stage.path, workers=config.workers)
            stage.details = {'slices': len(manifest), 'patches_per_slice': synth.patches_per_slice}
        return layout.synth / 'manifest.csv'

    @staticmethod
    def tile(config: RunConfig) -> Path:
        layout = StageLayout(config.output_dir)
        source = StageInputs.dataset_manifest_path(config, layout)
        manifest = ManifestStore.load(source).require_non_empty()

        with StageOutput(layout, 'tile', layout.tiles, config) as stage:
            stage.add_input(source)
            stage.add_upstream(source.parent)
            for record in manifest.slices:
                if not record.path or not Path(record.path).is_file():
                    raise MissingStageOutput(f"Image of slice {record.slice_id} not found at '{record.path}'")
                stage.add_input(record.path)
            patch_dir = stage.path / 'patches'

            def tile_one(record):
                image = ImageIO.read_image(record.path)
                records = []
                for patch in TilingService.tile_slice(image, config.patch_side, record.slice_id):
                    path = ImageIO.write_image(
                        patch, patch_dir / record.slice_id / f"r{patch.tile_row}c{patch.tile_col}.png"
                    )
                    records.append(PatchRecord(patch.patch_id, patch.tile_row, patch.tile_col, str(path)))
                return record.slice_id, records

            tiled = manifest.with_patches(dict(_parallel_map(tile_one, manifest.slices, config.workers)))
            ManifestStore.save(tiled, stage.path)
            stage.details = {'slices': len(tiled), 'patches_per_slice': tiled.patches_per_slice,
                             'patches': len(tiled) * tiled.patches_per_slice}
        logger.info(f"Tiled {len(tiled)} slices into {tiled.patches_per_slice} patches each")
        return layout.tiles / 'manifest.csv'

    @staticmethod
    def pretext_gen(config: RunConfig) -> list:
        layout = StageLayout(config.output_dir)
        manifest = StageInputs.tiled_manifest(layout)
        if config.pretext_source == 'train':
            pool = manifest.subset(make_split(manifest, config.holdout_plan())[0].train_ids)
        else:
            pool = manifest

        outputs = []
        for sampling in config.pretext_samplings():
            final_dir = layout.pretext(sampling.tag)
            with StageOutput(layout, 'pretext_gen', final_dir, config) as stage:
                stage.add_upstream(layout.tiles)
                sampled = DuplicationService.sample_pretext_slices(pool, sampling)

                def examples_for(slice_id):
                    return [example
                            for patch in StageInputs.read_patches(manifest.get(slice_id))
                            for example in DuplicationService.generate_pretext_examples(patch)]

                examples = [e for chunk in _parallel_map(examples_for, sampled, config.workers) for e in chunk]
                PretextDatasetWriter.write(examples, stage.path)
                stage.details = {
                    'tag': sampling.tag,
                    'fraction': sampling.fraction,
                    'source_pool': config.pretext_source,
                    'pool_slices': len(pool),
                    'slices': sampled,
                    'sources': len(examples) // len(DuplicationClass),
                    'examples': len(examples),
                }
            logger.info(f"{sampling.tag}: {len(sampled)} slices, {len(examples) // len(DuplicationClass)} sources, "
                        f"{len(examples)} pretext examples")
            outputs.append(final_dir / 'pretext.csv')
        return outputs

    @staticmethod
    def train_pretext(config: RunConfig) -> list:
        layout = StageLayout(config.output_dir)
        spec = config.network_spec()
        train_config = config.train_config()

        outputs = []
        for tag in config.self_supervised_tags:
            source = StageInputs.require(layout.pretext(tag) / 'pretext.csv', "run pretext_gen first")
            final_dir = layout.model(tag)
            with StageOutput(layout, 'train_pretext', final_dir, config) as stage:
                stage.add_upstream(source.parent)
                examples = PretextDatasetWriter.read(source.parent)
                held = _holdout_sources(examples, config.pretext_holdout, config.seed)
                train = [e for e in examples if e.source_patch_id not in held]
                holdout = [e for e in examples if e.source_patch_id in held]

                result = train_pretext(spec, train_config, train, holdout)
                save_params(result.params, stage.path / 'params.nnp')
                result.write_log(stage.path / 'training_log.csv')
                final = result.log[-1]
                metrics = {
                    'tag': tag,
                    'train_examples': len(train),
                    'holdout_examples': len(holdout),
                    'epochs': train_config.epochs,
                    'final_loss': final.loss,
                    'final_accuracy': final.accuracy,
                    'holdout_accuracy': None if np.isnan(final.holdout_accuracy) else final.holdout_accuracy,
                    'network': spec.to_dict(),
                }
                _write_json(metrics, stage.path / 'metrics.json')
                stage.details = {'holdout_accuracy': metrics['holdout_accuracy']}
            outputs.append(final_dir / 'params.nnp')
        return outputs

    @staticmethod
    def embed(config: RunConfig) -> list:
        layout = StageLayout(config.output_dir)
        manifest = StageInputs.tiled_manifest(layout)

        outputs = []
        for tag in config.self_supervised_tags:
            params_path = StageInputs.require(layout.model(tag) / 'params.nnp', "run train_pretext first")
            params = load_params(params_path)
            final_dir = layout.embeddings(tag)
            with StageOutput(layout, 'embed', final_dir, config) as stage:
                stage.add_upstream(layout.tiles)
                stage.add_upstream(params_path.parent)

                def embed_slice(record):
                    return extract_embeddings(params, StageInputs.read_patches(record))

                chunks = _parallel_map(embed_slice, manifest.slices, config.workers)
                vectors = [vector for chunk in chunks for vector in chunk]
                EmbeddingStore.export_embeddings(vectors, stage.path / EMBEDDING_FILE)
                stage.details = {'tag': tag, 'count': len(vectors), 'dim': params.spec.embedding_dim}
            logger.info(f"{tag}: extracted {len(vectors)} embeddings of dim {params.spec.embedding_dim}")
            outputs.append(final_dir / EMBEDDING_FILE)
        return outputs

    @staticmethod
    def import_embeddings(config: RunConfig) -> Path:
        """Bring externally computed patch embeddings in under ``external_tag``"""
        layout = StageLayout(config.output_dir)
        if not config.external_embeddings:
            raise MissingStageOutput("external_embeddings is not set; nothing to import")
        source = StageInputs.require(config.external_embeddings, "check the external_embeddings setting")
        manifest = StageInputs.tiled_manifest(layout)

        final_dir = layout.embeddings(config.external_tag)
        with StageOutput(layout, 'import_embeddings', final_dir, config) as stage:
            stage.add_input(source)
            stage.add_upstream(layout.tiles)
            by_patch = {vector.patch_id: vector for vector in EmbeddingStore.import_embeddings(source)}
            ExperimentService.check_embeddings(manifest, by_patch)
            ordered = [by_patch[pid] for record in manifest.slices for pid in record.patch_ids]
            EmbeddingStore.export_embeddings(ordered, stage.path / EMBEDDING_FILE)
            unused = len(by_patch) - len(ordered)
            if unused:
                logger.warning(f"{unused} imported embeddings match no patch in the manifest and were dropped")
            stage.details = {'tag': config.external_tag, 'count': len(ordered),
                             'dim': ordered[0].dim, 'dropped': unused}
        return final_dir / EMBEDDING_FILE

    @staticmethod
    def aggregate(config: RunConfig, methods=None, extractors=None) -> list:
        layout = StageLayout(config.output_dir)
        manifest = StageInputs.tiled_manifest(layout)
        methods = [CombinationMethod(m) for m in (methods or list(CombinationMethod))]

        outputs = []
        for tag in extractors or config.extractor_tags:
            source = StageInputs.embeddings_path(layout, tag)
            vectors = StageInputs.vectors_by_patch(layout, tag)
            ExperimentService.check_embeddings(manifest, vectors)
            final_dir = layout.aggregate(tag)
            with StageOutput(layout, 'aggregate', final_dir, config) as stage:
                stage.add_upstream(source.parent)
                stage.add_upstream(layout.tiles)
                for method in methods:
                    slices = AggregationService.aggregate_manifest(manifest, vectors, method)
                    EmbeddingStore.export_embeddings([s.as_vector() for s in slices],
                                                     stage.path / f"{method.value}.emb")
                    stage.details[method.value] = {'slices': len(slices), 'dim': slices[0].dim}
            outputs.extend(final_dir / f"{method.value}.emb" for method in methods)
        return outputs

    @staticmethod
    def train_svm(config: RunConfig, extractors=None) -> list:
        """Patch-level model on the hold-out training slices; eval scores it on the hold-out test slices"""
        layout = StageLayout(config.output_dir)
        manifest = StageInputs.tiled_manifest(layout)
        settings = config.experiment_settings()
        holdout = make_split(manifest, settings.holdout)[0]

        outputs = []
        for tag in extractors or config.extractor_tags:
            source = StageInputs.embeddings_path(layout, tag)
            vectors = StageInputs.vectors_by_patch(layout, tag)
            ExperimentService.check_embeddings(manifest, vectors)
            final_dir = layout.svm(tag)
            with StageOutput(layout, 'train_svm', final_dir, config) as stage:
                stage.add_upstream(source.parent)
                stage.add_upstream(layout.tiles)

                classifier = ExperimentService.train_patch_classifier(manifest, vectors, holdout, settings)
                save_model(classifier.model, stage.path / f"{PATCH_MODEL}.svm1")
                write_summary(classifier.model, stage.path / f"{PATCH_MODEL}.summary.json",
                              config=settings.patch_svm, class_names=CLASS_NAMES)
                _write_json(classifier.scaler_to_dict(), stage.path / f"{PATCH_MODEL}_scaler.json")
                stage.details[PATCH_MODEL] = {'converged': classifier.model.converged}
                if not classifier.model.converged:
                    logger.warning(f"{tag} patch SVM hit its iteration cap before converging")
                stage.details['holdout'] = {'train': holdout.train_ids, 'test': holdout.test_ids}
            outputs.append(final_dir / f"{PATCH_MODEL}.svm1")
        return outputs

    @staticmethod
    def eval(config: RunConfig, extractors=None) -> Path:
        layout = StageLayout(config.output_dir)
        manifest = StageInputs.tiled_manifest(layout)
        settings = config.experiment_settings()
        holdout = make_split(manifest, settings.holdout)[0]

        tags = extractors or config.extractor_tags
        reports, ordering = [], {}
        with StageOutput(layout, 'eval', layout.eval, config) as stage:
            stage.add_upstream(layout.tiles)
            vote_rows = []
            for tag in tags:
                source = StageInputs.embeddings_path(layout, tag)
                vectors = StageInputs.vectors_by_patch(layout, tag)
                ExperimentService.check_embeddings(manifest, vectors)
                classifier = StageInputs.patch_classifier(layout, tag)
                stage.add_upstream(source.parent)
                stage.add_upstream(layout.svm(tag))
                dim = next(iter(vectors.values())).dim
                if classifier.model.dim != dim:
                    raise DimMismatch(f"{tag}: patch SVM expects dim {classifier.model.dim}, embeddings have {dim}")

                patch_report, vote_report, votes = ExperimentService.evaluate_patch_level(
                    classifier, manifest, vectors, holdout, tag
                )
                tag_reports = [patch_report, vote_report] + [
                    ExperimentService.cross_validate_slices(manifest, vectors, method, settings, tag)
                    for method in CombinationMethod
                ]
                reports.extend(tag_reports)
                for slice_id in holdout.test_ids:
                    vote_rows.append([tag, slice_id, manifest.get(slice_id).label.label,
                                      TissueClass(votes[slice_id]).label])

                concat, vote = tag_reports[2].overall, vote_report.overall
                ordering[tag] = {'concat': concat, 'vote': vote, 'concat_at_least_vote': bool(concat >= vote)}
                logger.info(f"{tag}: concat {concat:.3f} vs vote {vote:.3f}"
                            f"{'' if concat >= vote else ' (concat below vote)'}")

            write_reports_json(reports, stage.path / 'reports.json')
            write_summary_csv(reports, stage.path / 'sensitivity.csv')
            write_comparison_table(reports, stage.path / 'comparison_table.csv', config.absent_extractors)
            write_slice_bars(reports, stage.path / 'slice_bars.csv')
            with open(stage.path / 'votes.csv', 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(['extractor', 'slice_id', 'truth', 'vote'])
                writer.writerows(vote_rows)
            stage.details = {'extractors': tags, 'not_provided': config.absent_extractors,
                             'concat_vs_vote': ordering}
        return layout.eval / 'comparison_table.csv'

    @staticmethod
    def tsne(config: RunConfig, extractors=None) -> list:
        """2-D layouts of the patch embeddings and of both slice-level feature sets"""
        layout = StageLayout(config.output_dir)
        manifest = StageInputs.tiled_manifest(layout)
        patch_labels = manifest.patch_labels()

        outputs = []
        for tag in extractors or config.extractor_tags:
            source = StageInputs.embeddings_path(layout, tag)
            vectors = StageInputs.vectors_by_patch(layout, tag)
            ExperimentService.check_embeddings(manifest, vectors)
            patch_ids = [pid for record in manifest.slices for pid in record.patch_ids]
            feature_sets = [('patch', patch_ids, np.array([vectors[pid].values for pid in patch_ids]),
                             [patch_labels[pid] for pid in patch_ids])]
            for method in CombinationMethod:
                slices = AggregationService.aggregate_manifest(manifest, vectors, method)
                feature_sets.append((method.value, [s.slice_id for s in slices],
                                     np.array([s.values for s in slices]), manifest.labels))

            final_dir = layout.tsne(tag)
            with StageOutput(layout, 'tsne', final_dir, config) as stage:
                stage.add_upstream(source.parent)
                for name, ids, X, labels in feature_sets:
                    perplexity = checked_perplexity(config.tsne_perplexity, len(ids), f"{tag} {name}")
                    result = run_tsne(compute_affinities(X, perplexity), config.tsne_config(perplexity))
                    write_scatter_csv(ids, result.layout, labels, stage.path / f"{name}.csv")
                    if config.tsne_svg:
                        write_scatter_svg(result.layout, labels, stage.path / f"{name}.svg", title=f"{tag} {name}")
                    stage.details[name] = {'points': len(ids), 'perplexity': perplexity,
                                           'initial_kl': result.kl_log[0], 'final_kl': result.kl_log[-1]}
            outputs.append(final_dir)
        return outputs

    @staticmethod
    def run_all(config: RunConfig) -> Path:
        """Every stage in order; returns the comparison table"""
        logger.info(f"Running the full pipeline into {config.output_dir} (seed {config.seed})")
        if config.uses_synthetic_data:
            StageService.synth(config)
        elif not config.dataset_manifest:
            raise MissingStageOutput("No dataset: set dataset_manifest or enable synth_enabled")
        StageService.tile(config)
        StageService.pretext_gen(config)
        StageService.train_pretext(config)
        StageService.embed(config)
        if config.external_embeddings:
            StageService.import_embeddings(config)
        StageService.aggregate(config)
        StageService.train_svm(config)
        table = StageService.eval(config)
        if config.tsne_enabled:
            StageService.tsne(config)
        logger.info(f"Pipeline finished; comparison table at {table}")
        return table
