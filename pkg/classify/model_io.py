"""
SVM1 model files and their JSON summaries.

Layout: magic ``SVM1``, uint32 LE header length, a JSON header (format
version, strategy, class labels, kernel, and per binary model its support
count, dimension, bias, C and convergence record), then for each binary
model its support vectors and dual coefficients as float64 LE.
"""
import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import InvalidModelFile
from .multiclass import MulticlassModel
from .svm import KernelSpec, SvmModel

MAGIC = b'SVM1'
FORMAT_VERSION = 1
LENGTH = struct.Struct('<I')


def _label(value):
    return int(value) if isinstance(value, (int, np.integer)) else value


def save_model(model: MulticlassModel, path) -> Path:
    path = Path(path)
    header = {
        'version': FORMAT_VERSION,
        'strategy': model.strategy,
        'classes': [_label(c) for c in model.classes],
        'kernel': model.models[0].kernel.to_dict(),
        'models': [
            {
                'positive_label': _label(m.positive_label),
                'n_support': m.n_support,
                'dim': m.dim,
                'bias': m.bias,
                'C': m.C,
                'converged': m.converged,
                'iterations': m.iterations,
                'n_train': m.n_train,
            }
            for m in model.models
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(LENGTH.pack(len(header_bytes)))
        f.write(header_bytes)
        for m in model.models:
            f.write(np.ascontiguousarray(m.support_vectors, dtype='<f8').tobytes())
            f.write(np.ascontiguousarray(m.dual_coef, dtype='<f8').tobytes())
    return path


def load_model(path) -> MulticlassModel:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise InvalidModelFile(f"{path.name} is not an SVM1 model file")
    try:
        (header_length,) = LENGTH.unpack_from(data, 4)
        offset = 4 + LENGTH.size
        header = json.loads(data[offset:offset + header_length].decode('utf-8'))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InvalidModelFile(f"{path.name}: unreadable header ({e})") from e
    if header.get('version') != FORMAT_VERSION:
        raise InvalidModelFile(f"{path.name}: unsupported model version {header.get('version')}")
    offset += header_length

    kernel = KernelSpec(header['kernel']['kind'], header['kernel']['gamma'])
    models = []
    for entry in header['models']:
        n, dim = entry['n_support'], entry['dim']
        needed = 8 * (n * dim + n)
        if offset + needed > len(data):
            raise InvalidModelFile(f"{path.name}: payload ends inside a binary model")
        vectors = np.frombuffer(data, dtype='<f8', count=n * dim, offset=offset).reshape(n, dim)
        offset += 8 * n * dim
        coef = np.frombuffer(data, dtype='<f8', count=n, offset=offset)
        offset += 8 * n
        models.append(SvmModel(
            support_vectors=vectors, dual_coef=coef, bias=entry['bias'], kernel=kernel,
            positive_label=entry['positive_label'], C=entry['C'], converged=entry['converged'],
            iterations=entry['iterations'], n_train=entry['n_train'],
        ))
    if offset != len(data):
        raise InvalidModelFile(f"{path.name}: {len(data) - offset} unexpected trailing bytes")
    return MulticlassModel(tuple(header['classes']), tuple(models), header['strategy'])


def model_summary(model: MulticlassModel, config=None, class_names=None) -> dict:
    """Support counts per class, convergence flags and the training config"""
    names = class_names or {}
    return {
        'strategy': model.strategy,
        'classes': [names.get(c, _label(c)) for c in model.classes],
        'support_vectors': {
            str(names.get(c, _label(c))): m.n_support for c, m in zip(model.classes, model.models)
        },
        'converged': model.converged,
        'iterations': [m.iterations for m in model.models],
        'config': config.to_dict() if config is not None else None,
    }


def write_summary(model: MulticlassModel, path, config=None, class_names=None) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(model_summary(model, config, class_names), f, indent=2, sort_keys=True)
        f.write('\n')
    return path
