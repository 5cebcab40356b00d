"""Grounded attention score: share of a token's attention mass that falls on
the ground-truth region.

Binary dump layout (all little-endian), one or more records back to back::

    magic      4 bytes   b"ATTN" or b"MASK"
    version    u32       1
    frames     u32
    rows       u32
    cols       u32
    prov_len   u32       length of the provenance string
    provenance prov_len bytes, UTF-8
    payload    ATTN: frames*rows*cols float32
               MASK: ceil(frames*rows*cols / 8) bytes, bits packed MSB-first

Tokens are ordered frame-major, then row, then column.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, List, Optional, Sequence, Tuple

import numpy as np

ATTN_MAGIC = b"ATTN"
MASK_MAGIC = b"MASK"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")

DEFAULT_COVERAGE = 0.5


class GasError(ValueError):
    pass


@dataclass(frozen=True)
class AttentionMap:
    weights: np.ndarray
    rows: int
    cols: int
    frames: int = 1
    provenance: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.size != self.frames * self.rows * self.cols:
            raise GasError(
                f"attention has {w.size} weights, grid needs {self.frames}x{self.rows}x{self.cols}"
            )
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise GasError("attention weights must be finite and non-negative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_array(cls, arr, provenance: str = "") -> "AttentionMap":
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[None]
        f, r, c = arr.shape
        return cls(arr, r, c, f, provenance)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.frames, self.rows, self.cols)

    def normalized(self) -> np.ndarray:
        total = self.weights.sum()
        if total <= 0:
            raise GasError("attention has zero total mass")
        return self.weights / total


@dataclass(frozen=True)
class RegionMask:
    mask: np.ndarray
    rows: int
    cols: int
    frames: int = 1
    provenance: str = ""

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool).reshape(-1)
        if m.size != self.frames * self.rows * self.cols:
            raise GasError(f"mask has {m.size} tokens, grid needs {self.frames}x{self.rows}x{self.cols}")
        object.__setattr__(self, "mask", m)

    @classmethod
    def from_array(cls, arr, provenance: str = "") -> "RegionMask":
        arr = np.asarray(arr, dtype=bool)
        if arr.ndim == 2:
            arr = arr[None]
        f, r, c = arr.shape
        return cls(arr, r, c, f, provenance)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.frames, self.rows, self.cols)

    def complement(self) -> "RegionMask":
        return RegionMask(~self.mask, self.rows, self.cols, self.frames, self.provenance)


def _masses(attn, mask) -> Tuple[float, float]:
    w = attn.weights if isinstance(attn, AttentionMap) else np.asarray(attn, dtype=np.float64).reshape(-1)
    m = mask.mask if isinstance(mask, RegionMask) else np.asarray(mask, dtype=bool).reshape(-1)
    if w.size != m.size:
        raise GasError(f"attention length {w.size} != mask length {m.size}")
    if isinstance(attn, AttentionMap) and isinstance(mask, RegionMask) and attn.shape != mask.shape:
        raise GasError(f"attention grid {attn.shape} != mask grid {mask.shape}")
    total = float(w.sum())
    if not total > 0:
        raise GasError("attention has zero total mass")
    return float(w[m].sum()), total


def grounded_attention_score(attn, mask) -> float:
    inside, total = _masses(attn, mask)
    return min(1.0, inside / total)


def _cell_edges(n_pixels: int, n_cells: int) -> np.ndarray:
    step = n_pixels // n_cells
    if step == 0:
        raise GasError(f"{n_pixels} pixels cannot fill {n_cells} cells (zero-area cells)")
    edges = np.arange(n_cells + 1) * step
    edges[-1] = n_pixels
    return edges


def mask_from_pixels(pixel_mask, grid: Tuple[int, int], coverage_threshold: float = DEFAULT_COVERAGE) -> RegionMask:
    """Token mask from a pixel mask of shape (H, W) or (frames, H, W).

    Cells are ``H // rows`` by ``W // cols`` pixels; the last row and column of
    cells absorb any remainder. A token is set when the masked fraction of its
    cell reaches ``coverage_threshold``.
    """
    if not 0 < coverage_threshold <= 1:
        raise GasError(f"coverage_threshold must lie in (0, 1], got {coverage_threshold}")
    pm = np.asarray(pixel_mask, dtype=bool)
    if pm.ndim == 2:
        pm = pm[None]
    if pm.ndim != 3:
        raise GasError("pixel mask must be 2-D or 3-D")
    rows, cols = grid
    re = _cell_edges(pm.shape[1], rows)
    ce = _cell_edges(pm.shape[2], cols)
    # integral image gives every cell count in O(1)
    ii = np.zeros((pm.shape[0], pm.shape[1] + 1, pm.shape[2] + 1), dtype=np.int64)
    ii[:, 1:, 1:] = pm.cumsum(axis=1).cumsum(axis=2)
    r0, r1 = re[:-1][:, None], re[1:][:, None]
    c0, c1 = ce[:-1][None, :], ce[1:][None, :]
    counts = ii[:, r1, c1] - ii[:, r0, c1] - ii[:, r1, c0] + ii[:, r0, c0]
    areas = (r1 - r0) * (c1 - c0)
    return RegionMask(counts >= coverage_threshold * areas, rows, cols, pm.shape[0])


@dataclass
class GasReport:
    count: int
    mean: float
    median: float
    min: float
    max: float
    pooled: float
    scores: List[float]
    provenance: List[str]

    def to_dict(self) -> dict:
        return {
            "GAS": {
                "count": self.count,
                "mean": self.mean,
                "median": self.median,
                "min": self.min,
                "max": self.max,
                "pooled": self.pooled,
            },
            "provenance": sorted(set(self.provenance)),
            "scores": list(self.scores),
        }

    def format_table(self, method: str = "model") -> str:
        width = max(len("Method"), len(method)) + 2
        return "\n".join(
            [
                f"{'Method':<{width}}{'GAS':>7}",
                f"{method:<{width}}{self.mean:>7.3f}",
            ]
        )


def gas_report(pairs: Sequence[Tuple[AttentionMap, RegionMask]]) -> GasReport:
    """Per-pair scores plus mean, median, extremes and the pooled ratio
    (sum of in-region mass over sum of total mass)."""
    if not pairs:
        raise GasError("need at least one (attention, mask) pair")
    scores, raw_in, raw_tot, prov = [], [], [], []
    for i, (attn, mask) in enumerate(pairs):
        try:
            a, t = _masses(attn, mask)
        except GasError as exc:
            raise GasError(f"pair {i}: {exc}") from None
        scores.append(min(1.0, a / t))
        raw_in.append(a)
        raw_tot.append(t)
        p = getattr(attn, "provenance", "")
        if p:
            prov.append(p)
    arr = np.array(scores)
    pooled = float(np.sum(raw_in) / np.sum(raw_tot))
    return GasReport(
        count=len(scores),
        mean=float(np.mean(arr)),
        median=float(np.median(arr)),
        min=float(arr.min()),
        max=float(arr.max()),
        pooled=min(1.0, pooled),
        scores=scores,
        provenance=prov,
    )


def _write_header(fh, magic, frames, rows, cols, provenance):
    prov = provenance.encode("utf-8")
    fh.write(_HEADER.pack(magic, DUMP_VERSION, frames, rows, cols, len(prov)))
    fh.write(prov)


def write_attention(fh: BinaryIO, attn: AttentionMap) -> None:
    _write_header(fh, ATTN_MAGIC, attn.frames, attn.rows, attn.cols, attn.provenance)
    fh.write(attn.weights.astype("<f4").tobytes())


def write_mask(fh: BinaryIO, mask: RegionMask) -> None:
    _write_header(fh, MASK_MAGIC, mask.frames, mask.rows, mask.cols, mask.provenance)
    fh.write(np.packbits(mask.mask).tobytes())


def _read_records(fh: BinaryIO, magic: bytes) -> list:
    out = []
    while True:
        head = fh.read(_HEADER.size)
        if not head:
            return out
        if len(head) != _HEADER.size:
            raise GasError("truncated dump header")
        got, version, frames, rows, cols, plen = _HEADER.unpack(head)
        if got != magic:
            raise GasError(f"expected magic {magic!r}, found {got!r}")
        if version != DUMP_VERSION:
            raise GasError(f"unsupported dump version {version}")
        prov = fh.read(plen)
        if len(prov) != plen:
            raise GasError("truncated provenance string")
        n = frames * rows * cols
        nbytes = 4 * n if magic == ATTN_MAGIC else (n + 7) // 8
        body = fh.read(nbytes)
        if len(body) != nbytes:
            raise GasError(f"truncated payload: {len(body)} of {nbytes} bytes")
        if magic == ATTN_MAGIC:
            w = np.frombuffer(body, dtype="<f4").astype(np.float64)
            out.append(AttentionMap(w, rows, cols, frames, prov.decode("utf-8")))
        else:
            bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[:n].astype(bool)
            out.append(RegionMask(bits, rows, cols, frames, prov.decode("utf-8")))


def read_attention(fh: BinaryIO) -> List[AttentionMap]:
    return _read_records(fh, ATTN_MAGIC)


def read_masks(fh: BinaryIO) -> List[RegionMask]:
    return _read_records(fh, MASK_MAGIC)


def pair_dumps(attns: Sequence[AttentionMap], masks: Sequence[RegionMask]) -> List[Tuple[AttentionMap, RegionMask]]:
    if len(attns) != len(masks):
        raise GasError(f"{len(attns)} attention records but {len(masks)} mask records")
    for i, (a, m) in enumerate(zip(attns, masks)):
        if a.shape != m.shape:
            raise GasError(f"record {i}: attention grid {a.shape} != mask grid {m.shape}")
    return list(zip(attns, masks))


def load_mask_image(path: str, threshold: Optional[int] = None) -> np.ndarray:
    """Boolean pixel mask from an image (nonzero pixels, or pixels above
    ``threshold`` when given) or a ``.npy`` array."""
    if str(path).endswith(".npy"):
        return np.load(path).astype(bool)
    from PIL import Image

    arr = np.asarray(Image.open(path).convert("L"))
    return arr > (threshold or 0)
