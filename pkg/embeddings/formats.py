"""
Embedding files.

EMB1 layout: magic ``EMB1``, uint32 LE count, uint32 LE dim, then
count x dim float32 LE values. A sidecar CSV ``<file>.index.csv`` with
header ``row,patch_id`` names each row. A plain CSV alternative
(``patch_id,v0,v1,...``) is accepted on import.
"""
import csv
import logging
import struct
from pathlib import Path

import numpy as np

from .exceptions import BadMagic, DimMismatch, IndexMismatch, TruncatedFile
from .vectors import EmbeddingVector

logger = logging.getLogger(__name__)

MAGIC = b'EMB1'
HEADER = struct.Struct('<4sII')


def index_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + '.index.csv')


class EmbeddingStore:
    """Utility to move embeddings between disk and memory"""

    @staticmethod
    def export_embeddings(vectors, path) -> Path:
        path = Path(path)
        dims = {vector.dim for vector in vectors}
        if len(dims) > 1:
            raise DimMismatch(f"Cannot export embeddings of differing dimensions {sorted(dims)}")
        dim = dims.pop() if dims else 0
        path.parent.mkdir(parents=True, exist_ok=True)

        payload = np.stack([v.values for v in vectors]).astype('<f4') if vectors else np.zeros((0, 0), '<f4')
        with open(path, 'wb') as f:
            f.write(HEADER.pack(MAGIC, len(vectors), dim))
            f.write(payload.tobytes())

        with open(index_path_for(path), 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['row', 'patch_id'])
            for row, vector in enumerate(vectors):
                writer.writerow([row, vector.patch_id])
        logger.debug(f"Exported {len(vectors)} embeddings of dim {dim} to {path}")
        return path

    @staticmethod
    def import_embeddings(path) -> list:
        """Read an EMB1 file (with its index) or a plain embedding CSV"""
        path = Path(path)
        if path.suffix.lower() == '.csv':
            return EmbeddingStore._import_csv(path)

        data = path.read_bytes()
        if len(data) < HEADER.size:
            if not data.startswith(MAGIC[:len(data)]):
                raise BadMagic(f"{path.name} is not an EMB1 file")
            raise TruncatedFile(f"{path.name}: header needs {HEADER.size} bytes, file has {len(data)}")
        magic, count, dim = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise BadMagic(f"{path.name} starts with {magic!r}, expected {MAGIC!r}")

        expected = HEADER.size + count * dim * 4
        if len(data) < expected:
            raise TruncatedFile(f"{path.name}: {count} x {dim} floats need {expected} bytes, file has {len(data)}")
        if len(data) > expected:
            raise TruncatedFile(f"{path.name}: {len(data) - expected} trailing bytes after payload")
        if count * dim:
            values = np.frombuffer(data, dtype='<f4', count=count * dim, offset=HEADER.size).reshape(count, dim)
        else:
            values = np.zeros((count, dim), dtype='<f4')

        patch_ids = EmbeddingStore._read_index(index_path_for(path), count)
        return [EmbeddingVector(patch_id=pid, values=row) for pid, row in zip(patch_ids, values)]

    @staticmethod
    def _read_index(index_path, count) -> list:
        if count == 0 and not index_path.exists():
            return []
        if not index_path.exists():
            raise IndexMismatch(f"Sidecar index {index_path.name} not found")
        with open(index_path, 'r', encoding='utf-8', newline='') as f:
            rows = list(csv.DictReader(f))
        if len(rows) != count:
            raise IndexMismatch(f"{index_path.name} has {len(rows)} rows, payload has {count}")
        patch_ids = [None] * count
        for row in rows:
            position = int(row['row'])
            if not 0 <= position < count or patch_ids[position] is not None:
                raise IndexMismatch(f"{index_path.name}: invalid or repeated row {position}")
            patch_ids[position] = row['patch_id']
        if len(set(patch_ids)) != count:
            raise IndexMismatch(f"{index_path.name} repeats patch ids")
        return patch_ids

    @staticmethod
    def _import_csv(path) -> list:
        vectors = []
        with open(path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if not header or header[0] != 'patch_id':
                raise BadMagic(f"{path.name}: expected a 'patch_id,v0,v1,...' header")
            dim = len(header) - 1
            for line, row in enumerate(reader, start=2):
                if len(row) != dim + 1:
                    raise DimMismatch(f"{path.name}:{line} has {len(row) - 1} values, expected {dim}")
                vectors.append(EmbeddingVector(patch_id=row[0], values=np.array(row[1:], dtype=np.float32)))
        if len({v.patch_id for v in vectors}) != len(vectors):
            raise IndexMismatch(f"{path.name} repeats patch ids")
        return vectors
