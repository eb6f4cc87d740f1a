# pipeline/serializers.py
from rest_framework import serializers

from dupless.exceptions import ConfigError
from imagecore.exceptions import OddPatchSide, PatchTooLarge
from imagecore.services import TilingService
from nnet.network import NetworkSpec
from pretext.services import PretextSampling

KERNELS = ['linear', 'rbf']


def _positive(name, value):
    if not value > 0:
        raise serializers.ValidationError(f"{name} must be > 0")
    return value


class RunConfigSerializer(serializers.Serializer):
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1)
    output_dir = serializers.CharField()
    dataset_manifest = serializers.CharField(allow_blank=True)
    external_embeddings = serializers.CharField(allow_blank=True)
    external_tag = serializers.RegexField(r'^[A-Za-z0-9][A-Za-z0-9._-]*$', max_length=50)
    workers = serializers.IntegerField(min_value=1, max_value=64)

    synth_enabled = serializers.BooleanField()
    slices_per_class = serializers.IntegerField(min_value=1)
    slice_width = serializers.IntegerField(min_value=2)
    slice_height = serializers.IntegerField(min_value=2)

    patch_side = serializers.IntegerField(min_value=2)

    pretext_fractions = serializers.CharField()
    pretext_source = serializers.ChoiceField(choices=['train', 'all'])
    pretext_holdout = serializers.FloatField(min_value=0.0, max_value=0.9)

    block_channels = serializers.CharField()

    batch_size = serializers.IntegerField(min_value=1)
    learning_rate = serializers.FloatField()
    epochs = serializers.IntegerField(min_value=1)
    optimizer = serializers.ChoiceField(choices=['adam', 'sgd'])

    patch_kernel = serializers.ChoiceField(choices=KERNELS)
    svm_c = serializers.FloatField()
    svm_gamma = serializers.FloatField()
    svm_tolerance = serializers.FloatField()
    svm_max_passes = serializers.IntegerField(min_value=1)
    slice_svm_c = serializers.FloatField()
    slice_kernel = serializers.ChoiceField(choices=KERNELS)
    standardize = serializers.BooleanField()

    holdout_test_fraction = serializers.FloatField()
    kfold = serializers.IntegerField(min_value=2)

    tsne_perplexity = serializers.FloatField()
    tsne_iterations = serializers.IntegerField(min_value=1)
    tsne_learning_rate = serializers.FloatField()
    tsne_enabled = serializers.BooleanField()
    tsne_svg = serializers.BooleanField()

    def validate_pretext_fractions(self, value):
        try:
            fractions = tuple(float(part) for part in str(value).split(',') if part.strip())
        except ValueError:
            raise serializers.ValidationError(f"Expected comma-separated fractions, got '{value}'")
        if not fractions:
            raise serializers.ValidationError("At least one pretext fraction is required")
        try:
            tags = [PretextSampling(fraction, 0).tag for fraction in fractions]
        except ConfigError as e:
            raise serializers.ValidationError(str(e))
        if len(set(tags)) != len(tags):
            raise serializers.ValidationError(f"Fractions map to duplicate extractor tags {tags}")
        return fractions

    def validate_block_channels(self, value):
        try:
            channels = tuple(int(part) for part in str(value).split(',') if part.strip())
        except ValueError:
            raise serializers.ValidationError(f"Expected comma-separated channel counts, got '{value}'")
        if not channels or min(channels) < 1:
            raise serializers.ValidationError("block_channels must be positive integers")
        return channels

    def validate_learning_rate(self, value):
        return _positive('learning_rate', value)

    def validate_svm_c(self, value):
        return _positive('svm_c', value)

    def validate_svm_gamma(self, value):
        return _positive('svm_gamma', value)

    def validate_svm_tolerance(self, value):
        return _positive('svm_tolerance', value)

    def validate_slice_svm_c(self, value):
        return _positive('slice_svm_c', value)

    def validate_tsne_learning_rate(self, value):
        return _positive('tsne_learning_rate', value)

    def validate_tsne_perplexity(self, value):
        if not value > 1:
            raise serializers.ValidationError("tsne_perplexity must be > 1")
        return value

    def validate_holdout_test_fraction(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("holdout_test_fraction must lie in (0, 1)")
        return value

    def validate(self, data):
        errors = {}
        try:
            NetworkSpec(input_side=data['patch_side'], block_channels=data['block_channels'])
        except ConfigError as e:
            errors['block_channels'] = [str(e)]

        if data['synth_enabled'] and not data['dataset_manifest']:
            try:
                TilingService.tile_grid(data['slice_width'], data['slice_height'], data['patch_side'])
            except (OddPatchSide, PatchTooLarge) as e:
                errors['patch_side'] = [str(e)]
        elif data['patch_side'] % 2:
            errors['patch_side'] = [f"Patch side {data['patch_side']} is odd"]

        self_tags = {PretextSampling(fraction, 0).tag for fraction in data['pretext_fractions']}
        if data['external_embeddings'] and data['external_tag'] in self_tags:
            errors['external_tag'] = [f"'{data['external_tag']}' clashes with a self-supervised extractor tag"]

        if errors:
            raise serializers.ValidationError(errors)
        return data
