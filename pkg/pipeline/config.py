"""
Run configuration.

Values are resolved per key with the precedence
command-line flag > ``--config`` file > ``DUPLESS_SEED`` (seed only) >
``settings.DUPLESS``, then validated as a whole by
``RunConfigSerializer`` before any stage starts.
"""
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path

from django.conf import settings

from classify.svm import KernelSpec, SvmConfig
from dupless.exceptions import ConfigError
from evaluation.experiment import ExperimentSettings
from evaluation.splits import SplitPlan
from nnet.network import NetworkSpec
from nnet.training import TrainConfig
from pretext.services import DuplicationClass, PretextSampling
from projection.tsne import TsneConfig
from synthgen.styles import SynthConfig

from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)

SEED_ENV = 'DUPLESS_SEED'


def _kernel(kind, gamma):
    return KernelSpec.rbf(gamma) if kind == 'rbf' else KernelSpec.linear()


@dataclass(frozen=True)
class RunConfig:
    seed: int
    output_dir: str
    dataset_manifest: str
    external_embeddings: str
    external_tag: str
    workers: int
    synth_enabled: bool
    slices_per_class: int
    slice_width: int
    slice_height: int
    patch_side: int
    pretext_fractions: tuple
    pretext_source: str
    pretext_holdout: float
    block_channels: tuple
    batch_size: int
    learning_rate: float
    epochs: int
    optimizer: str
    patch_kernel: str
    svm_c: float
    svm_gamma: float
    svm_tolerance: float
    svm_max_passes: int
    slice_svm_c: float
    slice_kernel: str
    standardize: bool
    holdout_test_fraction: float
    kfold: int
    tsne_perplexity: float
    tsne_iterations: int
    tsne_learning_rate: float
    tsne_enabled: bool
    tsne_svg: bool

    def to_dict(self) -> dict:
        data = asdict(self)
        data['pretext_fractions'] = list(self.pretext_fractions)
        data['block_channels'] = list(self.block_channels)
        return data

    @property
    def uses_synthetic_data(self) -> bool:
        return self.synth_enabled and not self.dataset_manifest

    def network_spec(self) -> NetworkSpec:
        return NetworkSpec(input_side=self.patch_side, block_channels=self.block_channels,
                           num_classes=len(DuplicationClass))

    def train_config(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
                           epochs=self.epochs, optimizer=self.optimizer, seed=self.seed)

    def patch_svm(self) -> SvmConfig:
        return SvmConfig(C=self.svm_c, kernel=_kernel(self.patch_kernel, self.svm_gamma),
                         tolerance=self.svm_tolerance, max_passes=self.svm_max_passes)

    def slice_svm(self) -> SvmConfig:
        return SvmConfig(C=self.slice_svm_c, kernel=_kernel(self.slice_kernel, self.svm_gamma),
                         tolerance=self.svm_tolerance, max_passes=self.svm_max_passes)

    def tsne_config(self, perplexity=None) -> TsneConfig:
        return TsneConfig(perplexity=perplexity or self.tsne_perplexity, iterations=self.tsne_iterations,
                          learning_rate=self.tsne_learning_rate, seed=self.seed)

    def holdout_plan(self) -> SplitPlan:
        return SplitPlan.holdout(seed=self.seed, test_fraction=self.holdout_test_fraction)

    def kfold_plan(self) -> SplitPlan:
        return SplitPlan.kfold(seed=self.seed, folds=self.kfold)

    def pretext_samplings(self) -> list:
        return [PretextSampling(fraction=fraction, seed=self.seed) for fraction in self.pretext_fractions]

    def synth_config(self) -> SynthConfig:
        return SynthConfig(slices_per_class=self.slices_per_class, slice_width=self.slice_width,
                           slice_height=self.slice_height, patch_side=self.patch_side, seed=self.seed)

    def experiment_settings(self) -> ExperimentSettings:
        return ExperimentSettings(patch_svm=self.patch_svm(), slice_svm=self.slice_svm(),
                                  holdout=self.holdout_plan(), kfold=self.kfold_plan(),
                                  standardize=self.standardize, workers=self.workers)

    @property
    def self_supervised_tags(self) -> list:
        return [sampling.tag for sampling in self.pretext_samplings()]

    @property
    def extractor_tags(self) -> list:
        """Self-supervised tags in fraction order, then the imported tag when embeddings are supplied"""
        tags = self.self_supervised_tags
        if self.external_embeddings:
            tags.append(self.external_tag)
        return tags

    @property
    def absent_extractors(self) -> list:
        return [] if self.external_embeddings else [self.external_tag]


class ConfigLoader:
    """Resolves and validates a RunConfig"""

    @staticmethod
    def keys() -> list:
        return list(RunConfigSerializer().fields)

    @staticmethod
    def read_file(path) -> dict:
        """Parse a ``key=value`` file; blank lines and ``#`` comments are skipped"""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        values = {}
        with open(path, 'r', encoding='utf-8') as f:
            for number, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith('#'):
                    continue
                key, sep, value = line.partition('=')
                if not sep:
                    raise ConfigError(f"{path.name}:{number}: expected key=value, got '{line}'")
                values[key.strip()] = value.strip()
        return values

    @staticmethod
    def resolve(overrides=None, config_file=None, environ=None) -> RunConfig:
        environ = os.environ if environ is None else environ
        known = ConfigLoader.keys()

        values = {key: settings.DUPLESS[key] for key in known}
        if environ.get(SEED_ENV, '').strip():
            values['seed'] = environ[SEED_ENV].strip()

        layers = []
        if config_file:
            layers.append(('config file', ConfigLoader.read_file(config_file)))
        layers.append(('flags', {k: v for k, v in (overrides or {}).items() if v is not None}))
        for source, layer in layers:
            unknown = sorted(set(layer) - set(known))
            if unknown:
                raise ConfigError(f"Unknown configuration keys in {source}: {', '.join(unknown)}")
            values.update(layer)

        serializer = RunConfigSerializer(data=values)
        if not serializer.is_valid():
            problems = '; '.join(
                f"{field}: {' '.join(str(m) for m in messages)}"
                for field, messages in sorted(serializer.errors.items())
            )
            raise ConfigError(f"Invalid configuration: {problems}")

        config = RunConfig(**serializer.validated_data)
        logger.debug(f"Resolved run configuration: {config.to_dict()}")
        return config
