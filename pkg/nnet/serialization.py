"""
NNP1 parameter files.

Layout: magic ``NNP1``, uint32 LE header length, a JSON header holding the
network spec, the initialization record and the (name, shape) manifest,
then every tensor as raw float32 LE values in manifest order.
"""
import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import InvalidParamsFile
from .network import NetworkParams, NetworkSpec

MAGIC = b'NNP1'
LENGTH = struct.Struct('<I')


def save_params(params: NetworkParams, path) -> Path:
    path = Path(path)
    header = {
        'spec': params.spec.to_dict(),
        'init': params.init,
        'tensors': [[name, list(value.shape)] for name, value in params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(LENGTH.pack(len(header_bytes)))
        f.write(header_bytes)
        for _, value in params.items():
            f.write(np.ascontiguousarray(value, dtype='<f4').tobytes())
    return path


def load_params(path) -> NetworkParams:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise InvalidParamsFile(f"{path.name} is not an NNP1 parameter file")
    try:
        (header_length,) = LENGTH.unpack_from(data, 4)
        offset = 4 + LENGTH.size
        header = json.loads(data[offset:offset + header_length].decode('utf-8'))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InvalidParamsFile(f"{path.name}: unreadable header ({e})") from e
    offset += header_length

    tensors = {}
    for name, shape in header['tensors']:
        count = int(np.prod(shape))
        if offset + 4 * count > len(data):
            raise InvalidParamsFile(f"{path.name}: payload ends inside tensor {name}")
        tensors[name] = np.frombuffer(data, dtype='<f4', count=count, offset=offset).reshape(shape).astype(np.float32)
        offset += 4 * count
    if offset != len(data):
        raise InvalidParamsFile(f"{path.name}: {len(data) - offset} unexpected trailing bytes")

    spec_fields = header['spec']
    spec = NetworkSpec(
        input_side=spec_fields['input_side'],
        block_channels=tuple(spec_fields['block_channels']),
        num_classes=spec_fields['num_classes'],
        input_channels=spec_fields.get('input_channels', 3),
    )
    return NetworkParams(spec, tensors, header.get('init', {}))
