"""Pose manifest files.

One JSON object per line. The first line is a header::

    {"format": "pose_manifest", "pose_convention": "c2w", "video_id": "...", "source": "scanned"}

``video_id``, ``source`` and ``duration_s`` are optional. Each following line
is one frame::

    {"frame_index": 0, "image_ref": "color/0.jpg", "k": [9 reals], "pose": [16 reals]}

``k`` and ``pose`` are row-major; ``image_ref``, ``width`` and ``height`` are
optional. Reals are written with 17 significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO

import numpy as np

from geopipe.geometry import CONVENTIONS, ORTHONORMAL_TOL, CalibratedFrame, CameraIntrinsics, GeometryError, RigidPose

MANIFEST_FORMAT = "pose_manifest"
# on-disk rotations are often stored with ~7 digits; snap those onto SO(3)
SNAP_TOL = 1e-5


class ManifestError(ValueError):
    def __init__(self, message, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class PoseManifest:
    frames: List[CalibratedFrame]
    pose_convention: str
    video_id: str = "video"
    source: str = "scanned"
    duration_s: Optional[float] = None


def _reals(values: Iterable[float]) -> str:
    return "[" + ",".join(format(float(v) + 0.0, ".17g") for v in values) + "]"


def _snap_rotation(r: np.ndarray, lineno: int) -> np.ndarray:
    drift = np.max(np.abs(r.T @ r - np.eye(3)))
    if drift > SNAP_TOL:
        raise ManifestError(f"pose rotation is not orthonormal (max drift {drift:.3g})", lineno)
    if drift < ORTHONORMAL_TOL and np.linalg.det(r) > 0:
        return r
    u, _, vt = np.linalg.svd(r)
    snapped = u @ vt
    if np.linalg.det(snapped) < 0:
        raise ManifestError("pose rotation is a reflection", lineno)
    return snapped


def write_manifest(fh: TextIO, manifest: PoseManifest) -> None:
    header = {
        "format": MANIFEST_FORMAT,
        "pose_convention": manifest.pose_convention,
        "video_id": manifest.video_id,
        "source": manifest.source,
    }
    if manifest.duration_s is not None:
        header["duration_s"] = manifest.duration_s
    fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
    for f in manifest.frames:
        pose = f.pose if f.pose.convention == manifest.pose_convention else (
            f.pose.to_c2w() if manifest.pose_convention == "c2w" else f.pose.to_w2c()
        )
        parts = [f'"frame_index":{f.frame_index}']
        if f.image_ref is not None:
            parts.append(f'"image_ref":{json.dumps(f.image_ref)}')
        if f.image_size is not None:
            parts.append(f'"width":{int(f.image_size[0])},"height":{int(f.image_size[1])}')
        parts.append(f'"k":{_reals(f.intrinsics.k.ravel())}')
        parts.append(f'"pose":{_reals(pose.matrix.ravel())}')
        fh.write("{" + ",".join(parts) + "}\n")


def read_manifest(fh: TextIO) -> PoseManifest:
    lines = iter(enumerate(fh, start=1))
    header = None
    for lineno, line in lines:
        if line.strip():
            try:
                header = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"header is not valid JSON ({exc.msg})", lineno) from None
            break
    if not isinstance(header, dict):
        raise ManifestError("missing manifest header", 1)
    convention = header.get("pose_convention")
    if convention not in CONVENTIONS:
        raise ManifestError(f"header must declare pose_convention as one of {CONVENTIONS}", lineno)

    frames: List[CalibratedFrame] = []
    seen = set()
    for lineno, line in lines:
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            idx = rec["frame_index"]
            k = np.array(rec["k"], dtype=np.float64)
            pose = np.array(rec["pose"], dtype=np.float64)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"malformed frame record ({exc.msg})", lineno) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad frame record ({exc})", lineno) from None
        if k.size != 9 or pose.size != 16:
            raise ManifestError(f"k needs 9 values and pose 16, got {k.size} and {pose.size}", lineno)
        if idx in seen:
            raise ManifestError(f"duplicate frame_index {idx}", lineno)
        seen.add(idx)
        m = pose.reshape(4, 4)
        size = None
        if "width" in rec or "height" in rec:
            size = (int(rec["width"]), int(rec["height"]))
        try:
            r = _snap_rotation(m[:3, :3], lineno)
            if np.max(np.abs(m[3] - [0, 0, 0, 1])) > 1e-12:
                raise ManifestError("pose bottom row must be (0, 0, 0, 1)", lineno)
            frames.append(
                CalibratedFrame(
                    idx,
                    CameraIntrinsics(k.reshape(3, 3)),
                    RigidPose(r, m[:3, 3], convention),
                    rec.get("image_ref"),
                    size,
                )
            )
        except GeometryError as exc:
            raise ManifestError(f"frame {idx}: {exc}", lineno) from None
    frames.sort(key=lambda f: f.frame_index)
    return PoseManifest(
        frames,
        convention,
        video_id=header.get("video_id", "video"),
        source=header.get("source", "scanned"),
        duration_s=header.get("duration_s"),
    )


def load_manifest(path) -> PoseManifest:
    with open(path, encoding="utf-8") as fh:
        return read_manifest(fh)


def frames_from_centers(centers: Sequence[Sequence[float]], focal: float = 500.0) -> List[CalibratedFrame]:
    """Identity-oriented frames at the given world positions (test fixtures,
    synthetic scenes)."""
    k = CameraIntrinsics.from_focal(focal, focal, 320.0, 240.0)
    return [
        CalibratedFrame(i, k, RigidPose(np.eye(3), np.asarray(c, dtype=float), "c2w"))
        for i, c in enumerate(centers)
    ]
