"""
Layer kernels with explicit forward/backward passes.

Tensors are numpy arrays in (N, C, H, W) layout. Every forward returns
``(output, cache)``; the matching backward consumes ``(dout, cache)``.
Kernels compute in the dtype of their inputs so the same code serves
float32 training and float64 gradient checks.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ShapeMismatch


def conv3x3_forward(x, weight, bias):
    """3 x 3 convolution, stride 1, zero padding 1"""
    if x.ndim != 4 or weight.shape[1:] != (x.shape[1], 3, 3):
        raise ShapeMismatch(f"conv3x3: input {x.shape} incompatible with weight {weight.shape}")
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(2, 3))  # N, C, H, W, 3, 3
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))  # N, H, W, F
    out = out.transpose(0, 3, 1, 2) + bias.reshape(1, -1, 1, 1)
    return np.ascontiguousarray(out), (windows, weight)


def conv3x3_backward(dout, cache, need_input_grad=True):
    windows, weight = cache
    dweight = np.tensordot(dout, windows, axes=([0, 2, 3], [0, 2, 3]))  # F, C, 3, 3
    dbias = dout.sum(axis=(0, 2, 3))
    dx = None
    if need_input_grad:
        padded = np.pad(dout, ((0, 0), (0, 0), (1, 1), (1, 1)))
        dwindows = sliding_window_view(padded, (3, 3), axis=(2, 3))  # N, F, H, W, 3, 3
        flipped = weight[:, :, ::-1, ::-1]
        dx = np.tensordot(dwindows, flipped, axes=([1, 4, 5], [0, 2, 3]))  # N, H, W, C
        dx = np.ascontiguousarray(dx.transpose(0, 3, 1, 2))
    return dx, dweight, dbias


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def maxpool2_forward(x):
    """2 x 2 max-pool, stride 2; ties resolve to the first window element"""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f"maxpool2: spatial size {h} x {w} is not even")
    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    index = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, index[..., None], axis=-1)[..., 0]
    return out, (index, x.shape)


def maxpool2_backward(dout, cache):
    index, shape = cache
    n, c, h, w = shape
    dblocks = np.zeros(dout.shape + (4,), dtype=dout.dtype)
    np.put_along_axis(dblocks, index[..., None], dout[..., None], axis=-1)
    dx = dblocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(shape)
    return dx


def global_avg_pool_forward(x):
    return x.mean(axis=(2, 3)), x.shape


def global_avg_pool_backward(dout, shape):
    n, c, h, w = shape
    return np.broadcast_to((dout / (h * w))[:, :, None, None], shape).copy()


def affine_forward(x, weight, bias):
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"affine: input {x.shape} incompatible with weight {weight.shape}")
    return x @ weight.T + bias, (x, weight)


def affine_backward(dout, cache):
    x, weight = cache
    return dout @ weight, dout.T @ x, dout.sum(axis=0)


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient with respect to the logits"""
    n = logits.shape[0]
    log_probs = log_softmax(logits)
    loss = -log_probs[np.arange(n), labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1
    return loss, dlogits / n
