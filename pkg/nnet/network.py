"""
Small plain CNN used as the pretext-task backbone and feature extractor.

Each block is conv3x3 -> ReLU -> maxpool2; the final feature map is
globally average-pooled into the embedding, and a single affine head maps
the embedding to class logits.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from dupless.exceptions import ConfigError
from embeddings.vectors import EmbeddingVector

from . import layers
from .exceptions import LabelOutOfRange, ShapeMismatch

logger = logging.getLogger(__name__)

INIT_SCHEME = 'he-uniform-fan-in'


@dataclass(frozen=True)
class NetworkSpec:
    input_side: int = 128
    block_channels: tuple = (8, 16, 32, 64)
    num_classes: int = 7
    input_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, 'block_channels', tuple(int(c) for c in self.block_channels))
        if not self.block_channels or min(self.block_channels) < 1:
            raise ConfigError(f"block_channels must be positive, got {self.block_channels}")
        if self.input_side < 1 or self.input_side % (2 ** len(self.block_channels)):
            raise ConfigError(
                f"input_side {self.input_side} is not divisible by 2^{len(self.block_channels)}"
            )
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be at least 2, got {self.num_classes}")

    @property
    def embedding_dim(self) -> int:
        return self.block_channels[-1]

    def tensor_shapes(self) -> dict:
        """Parameter name -> shape, in serialization order"""
        shapes = {}
        in_channels = self.input_channels
        for index, out_channels in enumerate(self.block_channels):
            shapes[f"block{index}.conv.weight"] = (out_channels, in_channels, 3, 3)
            shapes[f"block{index}.conv.bias"] = (out_channels,)
            in_channels = out_channels
        shapes['head.weight'] = (self.num_classes, self.embedding_dim)
        shapes['head.bias'] = (self.num_classes,)
        return shapes

    def to_dict(self) -> dict:
        return {
            'input_side': self.input_side,
            'block_channels': list(self.block_channels),
            'num_classes': self.num_classes,
            'input_channels': self.input_channels,
        }


@dataclass
class NetworkParams:
    spec: NetworkSpec
    tensors: dict
    init: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = self.spec.tensor_shapes()
        if list(self.tensors) != list(expected):
            raise ShapeMismatch(f"Parameter names {list(self.tensors)} do not match spec {list(expected)}")
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != shape:
                raise ShapeMismatch(f"{name}: shape {self.tensors[name].shape}, expected {shape}")

    @classmethod
    def initialize(cls, spec: NetworkSpec, seed: int) -> 'NetworkParams':
        """He-uniform (fan-in) weights, zero biases"""
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in spec.tensor_shapes().items():
            if name.endswith('.bias'):
                tensors[name] = np.zeros(shape, dtype=np.float32)
            else:
                fan_in = int(np.prod(shape[1:]))
                limit = np.sqrt(6.0 / fan_in)
                tensors[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
        return cls(spec, tensors, {'scheme': INIT_SCHEME, 'seed': int(seed)})

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> 'NetworkParams':
        tensors = {name: np.zeros(shape, dtype=np.float32) for name, shape in spec.tensor_shapes().items()}
        return cls(spec, tensors, {'scheme': 'zeros', 'seed': 0})

    def astype(self, dtype) -> 'NetworkParams':
        return NetworkParams(self.spec, {k: v.astype(dtype) for k, v in self.tensors.items()}, dict(self.init))

    def copy(self) -> 'NetworkParams':
        return self.astype(next(iter(self.tensors.values())).dtype)

    def __getitem__(self, name):
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    def equals(self, other) -> bool:
        return (self.spec == other.spec and list(self.tensors) == list(other.tensors)
                and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors))


def _check_batch(params, batch):
    spec = params.spec
    expected = (spec.input_channels, spec.input_side, spec.input_side)
    if batch.ndim != 4 or tuple(batch.shape[1:]) != expected:
        raise ShapeMismatch(f"Batch shape {batch.shape} does not match (N, {', '.join(map(str, expected))})")


def forward_cached(params: NetworkParams, batch):
    """Forward pass that also returns the per-layer caches needed by backward"""
    _check_batch(params, batch)
    caches = []
    x = batch
    for index in range(len(params.spec.block_channels)):
        x, conv_cache = layers.conv3x3_forward(
            x, params[f"block{index}.conv.weight"], params[f"block{index}.conv.bias"]
        )
        x, relu_mask = layers.relu_forward(x)
        x, pool_cache = layers.maxpool2_forward(x)
        caches.append((conv_cache, relu_mask, pool_cache))
    embedding, gap_shape = layers.global_avg_pool_forward(x)
    logits, head_cache = layers.affine_forward(embedding, params['head.weight'], params['head.bias'])
    return logits, embedding, (caches, gap_shape, head_cache)


def forward(params: NetworkParams, batch):
    """Return (logits, embedding) for a (N, 3, S, S) batch scaled to [0, 1]"""
    logits, embedding, _ = forward_cached(params, batch)
    return logits, embedding


def activation_pattern(params: NetworkParams, batch) -> bytes:
    """ReLU masks and max-pool selections of a forward pass, packed for comparison"""
    _, _, (caches, _, _) = forward_cached(params, batch)
    parts = []
    for _, relu_mask, (pool_index, _) in caches:
        parts.append(np.packbits(relu_mask).tobytes())
        parts.append(pool_index.astype(np.int8).tobytes())
    return b''.join(parts)


def loss_and_grad(params: NetworkParams, batch, labels):
    """Mean cross-entropy over the batch and its gradient for every parameter"""
    loss, grads, _ = loss_grad_and_logits(params, batch, labels)
    return loss, grads


def loss_grad_and_logits(params: NetworkParams, batch, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (batch.shape[0],):
        raise ShapeMismatch(f"Got {labels.shape[0] if labels.ndim else 0} labels for a batch of {batch.shape[0]}")
    if labels.size and (labels.min() < 0 or labels.max() >= params.spec.num_classes):
        raise LabelOutOfRange(f"Labels must lie in [0, {params.spec.num_classes})")

    logits, _, (caches, gap_shape, head_cache) = forward_cached(params, batch)
    loss, dlogits = layers.softmax_cross_entropy(logits, labels)

    grads = {}
    dembedding, grads['head.weight'], grads['head.bias'] = layers.affine_backward(dlogits, head_cache)
    dx = layers.global_avg_pool_backward(dembedding, gap_shape)
    for index in reversed(range(len(caches))):
        conv_cache, relu_mask, pool_cache = caches[index]
        dx = layers.maxpool2_backward(dx, pool_cache)
        dx = layers.relu_backward(dx, relu_mask)
        dx, dweight, dbias = layers.conv3x3_backward(dx, conv_cache, need_input_grad=index > 0)
        grads[f"block{index}.conv.weight"] = dweight
        grads[f"block{index}.conv.bias"] = dbias

    ordered = {name: grads[name] for name in params.spec.tensor_shapes()}
    return float(loss), NetworkParams(params.spec, ordered, dict(params.init)), logits


def patches_to_batch(patches, dtype=np.float32):
    """Stack 8-bit patches into an (N, 3, S, S) batch scaled by 1/255"""
    pixels = np.stack([np.asarray(p.pixels) for p in patches])
    return pixels_to_batch(pixels, dtype)


def pixels_to_batch(pixels, dtype=np.float32):
    return (pixels.transpose(0, 3, 1, 2).astype(dtype)) / dtype(255.0)


def extract_embedding(params: NetworkParams, patch) -> EmbeddingVector:
    if patch.side != params.spec.input_side:
        raise ShapeMismatch(f"Patch side {patch.side} does not match network input {params.spec.input_side}")
    _, embedding = forward(params, patches_to_batch([patch]))
    return EmbeddingVector(patch_id=patch.patch_id, values=embedding[0])


def extract_embeddings(params: NetworkParams, patches, batch_size=32) -> list:
    """Batched ``extract_embedding``; output follows input order"""
    vectors = []
    for start in range(0, len(patches), batch_size):
        chunk = patches[start:start + batch_size]
        for patch in chunk:
            if patch.side != params.spec.input_side:
                raise ShapeMismatch(
                    f"Patch {patch.patch_id} side {patch.side} does not match network input {params.spec.input_side}"
                )
        _, embedding = forward(params, patches_to_batch(chunk))
        vectors.extend(EmbeddingVector(patch_id=p.patch_id, values=row) for p, row in zip(chunk, embedding))
    return vectors
