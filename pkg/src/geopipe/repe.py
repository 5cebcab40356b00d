"""Sinusoidal encoding of relative camera transforms and fusion with per-frame
semantic features.

Each of the 16 entries of a 4x4 relative transform (row-major) is expanded
into ``m`` interleaved (sin, cos) pairs at divisors ``gamma ** (j / m)``,
``j = 0 .. m-1``, giving a ``32 * m`` vector per frame. ``m = ceil(C / 32)``
for a semantic channel width ``C``; the surplus entries are dropped before
the additive fusion.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, List, Sequence

import numpy as np

from geopipe.geometry import CalibratedFrame, first_frame_transform, relative_transform

DEFAULT_GAMMA = 10000.0

DUMP_MAGIC = b"REPE"
DUMP_VERSION = 1
_DUMP_HEADER = struct.Struct("<4sIII")


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyConfig:
    channel_dim: int
    gamma: float = DEFAULT_GAMMA
    normalize_intrinsics: bool = False

    def __post_init__(self):
        if int(self.channel_dim) != self.channel_dim or self.channel_dim < 1:
            raise EncodingError(f"channel_dim must be a positive integer, got {self.channel_dim!r}")
        if not (math.isfinite(self.gamma) and self.gamma > 1):
            raise EncodingError(f"gamma must be a finite value > 1, got {self.gamma!r}")

    @property
    def m(self) -> int:
        return -(-int(self.channel_dim) // 32)

    @property
    def embedding_dim(self) -> int:
        return 32 * self.m

    def divisors(self) -> np.ndarray:
        m = self.m
        return self.gamma ** (np.arange(m, dtype=np.float64) / m)


def _encode(values: np.ndarray, config: FrequencyConfig) -> np.ndarray:
    phase = values[:, None] / config.divisors()[None, :]
    out = np.empty((values.size, 2 * config.m))
    out[:, 0::2] = np.sin(phase)
    out[:, 1::2] = np.cos(phase)
    return out.reshape(-1)


def sinusoidal_encode(x: float, config: FrequencyConfig) -> np.ndarray:
    """``2m`` values ``[sin(x/d_0), cos(x/d_0), ..., sin(x/d_{m-1}), cos(x/d_{m-1})]``."""
    x = float(x)
    if not math.isfinite(x):
        raise EncodingError(f"cannot encode non-finite value {x!r}")
    return _encode(np.array([x]), config)


def encode_transform(g, config: FrequencyConfig) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (4, 4):
        raise EncodingError(f"transform must be 4x4, got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise EncodingError("cannot encode non-finite transform entries")
    return _encode(g.reshape(-1), config)


def fuse(rel, sem) -> np.ndarray:
    """Add the relative embedding to semantic features.

    ``sem`` is either one vector of width C or a (tokens, C) patch grid; in the
    grid case the same frame embedding is added to every token.
    """
    rel = np.asarray(rel, dtype=np.float64)
    sem = np.asarray(sem, dtype=np.float64)
    if rel.ndim != 1 or sem.ndim not in (1, 2):
        raise EncodingError("relative embedding must be 1-D and semantic features 1-D or 2-D")
    c = sem.shape[-1]
    if rel.size < c or rel.size - c >= 32:
        raise EncodingError(
            f"relative embedding length {rel.size} does not match semantic width {c} "
            f"(expected 32*ceil({c}/32) = {32 * -(-c // 32)})"
        )
    return rel[:c] + sem


def encode_sequence(frames: Sequence[CalibratedFrame], config: FrequencyConfig) -> List[np.ndarray]:
    """One embedding per frame: the first against the identity reference
    camera, every later one against its predecessor."""
    if not frames:
        raise EncodingError("need at least one frame")
    norm = config.normalize_intrinsics
    out = [encode_transform(first_frame_transform(frames[0], norm), config)]
    for prev, cur in zip(frames[:-1], frames[1:]):
        out.append(encode_transform(relative_transform(cur, prev, norm), config))
    return out


def write_embedding_dump(fh: BinaryIO, embeddings: Sequence[np.ndarray]) -> None:
    """16-byte little-endian header (magic, version, count, length) then the
    embeddings as float64 LE, frame-major."""
    length = len(embeddings[0]) if len(embeddings) else 0
    if any(len(e) != length for e in embeddings):
        raise EncodingError("all embeddings in a dump must share one length")
    fh.write(_DUMP_HEADER.pack(DUMP_MAGIC, DUMP_VERSION, len(embeddings), length))
    if embeddings:
        fh.write(np.asarray(embeddings, dtype="<f8").tobytes())


def read_embedding_dump(fh: BinaryIO) -> np.ndarray:
    head = fh.read(_DUMP_HEADER.size)
    if len(head) != _DUMP_HEADER.size:
        raise EncodingError("truncated embedding dump header")
    magic, version, count, length = _DUMP_HEADER.unpack(head)
    if magic != DUMP_MAGIC:
        raise EncodingError(f"bad magic {magic!r}")
    if version != DUMP_VERSION:
        raise EncodingError(f"unsupported dump version {version}")
    body = fh.read()
    if len(body) != 8 * count * length:
        raise EncodingError(f"dump body has {len(body)} bytes, expected {8 * count * length}")
    return np.frombuffer(body, dtype="<f8").reshape(count, length).astype(np.float64)
