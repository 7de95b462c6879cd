"""Fixed-width state/action features from full-resolution block matrices.

Each per-relation row is reduced to ``width`` entries by averaging
non-overlapping contiguous windows. Window sizes differ by at most one; the
trailing windows take the extra element when the length does not divide
evenly. Rows shorter than the width are copied into the leading positions
and zero padded.
"""
from __future__ import annotations

import numpy as np

from .catalog import Catalog
from .errors import ValidationError

DEFAULT_WIDTH = 32


def _window_sizes(n: int, width: int) -> np.ndarray:
    base, rem = divmod(n, width)
    sizes = np.full(width, base, dtype=np.int64)
    if rem:
        sizes[width - rem:] += 1
    return sizes


def downsample(row, width: int) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.size == 0:
        raise ValidationError("downsample needs a non-empty 1-D row")
    if int(width) < 1:
        raise ValidationError(f"width must be >= 1, got {width!r}")
    n = row.size
    if n == width:
        return row.copy()
    if n < width:
        out = np.zeros(width)
        out[:n] = row
        return out
    sizes = _window_sizes(n, width)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return np.add.reduceat(row, starts) / sizes


def _encode(matrix, width: int) -> np.ndarray:
    return np.stack([downsample(r, width) for r in matrix])


def encode_buffer_state(snapshot, width: int = DEFAULT_WIDTH) -> np.ndarray:
    return _encode(snapshot, width)


def encode_query_action(access, width: int = DEFAULT_WIDTH) -> np.ndarray:
    return _encode(access, width)


def feature_vector(state: np.ndarray, action: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if state.shape != action.shape:
        raise ValidationError(f"state shape {state.shape} != action shape {action.shape}")
    return np.concatenate([state.ravel(), action.ravel()])


class Downsampler:
    """Precomputed flat-vector encoder for one catalog and width.

    ``encode(flat)`` equals ``encode_buffer_state`` applied to the ragged
    rows that ``flat`` concatenates, but costs a single ``reduceat``.
    """

    def __init__(self, catalog: Catalog, width: int = DEFAULT_WIDTH):
        if int(width) < 1:
            raise ValidationError(f"width must be >= 1, got {width!r}")
        self.width = int(width)
        self.shape = (len(catalog), self.width)
        starts, sizes, pos = [], [], []
        for i, rel in enumerate(catalog.relations):
            n = rel.block_count
            off = int(catalog.offsets[i])
            if n <= width:
                s = np.ones(n, dtype=np.int64)
                p = np.arange(n)
            else:
                s = _window_sizes(n, width)
                p = np.arange(width)
            starts.append(off + np.concatenate([[0], np.cumsum(s)[:-1]]))
            sizes.append(s)
            pos.append(i * width + p)
        self._starts = np.concatenate(starts)
        self._sizes = np.concatenate(sizes).astype(np.float64)
        self._pos = np.concatenate(pos)

    def encode(self, flat: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape[0] * self.shape[1])
        out[self._pos] = np.add.reduceat(flat, self._starts) / self._sizes
        return out.reshape(self.shape)
