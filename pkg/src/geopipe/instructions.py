"""Motion labels, instruction templates and shot partitioning.

Camera axes follow the usual vision convention: x right, y down, z forward.
A positive yaw is a counterclockwise turn seen from above (rotation about the
camera's up axis, -y) and is labelled ``rotate_left``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

FORWARD = "forward"
BACKWARD = "backward"
LEFT = "left"
RIGHT = "right"
UP = "up"
DOWN = "down"
ROTATE_LEFT = "rotate_left"
ROTATE_RIGHT = "rotate_right"
STATIONARY = "stationary"

LABELS = (FORWARD, BACKWARD, LEFT, RIGHT, UP, DOWN, ROTATE_LEFT, ROTATE_RIGHT, STATIONARY)

OPPOSITE = {
    FORWARD: BACKWARD,
    BACKWARD: FORWARD,
    LEFT: RIGHT,
    RIGHT: LEFT,
    UP: DOWN,
    DOWN: UP,
    ROTATE_LEFT: ROTATE_RIGHT,
    ROTATE_RIGHT: ROTATE_LEFT,
    STATIONARY: STATIONARY,
}

PHRASES = {
    FORWARD: "move forward",
    BACKWARD: "move backward",
    LEFT: "move left",
    RIGHT: "move right",
    UP: "move up",
    DOWN: "move down",
    ROTATE_LEFT: "turn left",
    ROTATE_RIGHT: "turn right",
    STATIONARY: "stay still",
}

DEFAULT_TRANSLATION_THRESHOLD = 0.1
DEFAULT_ROTATION_THRESHOLD = 0.1

TRAJECTORY_TEMPLATE = "Please show me the path from {start} to {end}."
_TRAJECTORY_RE = re.compile(r"^Please show me the path from (.+) to (.+)\.$", re.DOTALL)

Rewriter = Callable[[str], str]


class InstructionError(ValueError):
    pass


@dataclass(frozen=True)
class MotionLabel:
    kind: str
    magnitude: float = 0.0

    def __post_init__(self):
        if self.kind not in LABELS:
            raise InstructionError(f"unknown motion label {self.kind!r}")
        if not (self.magnitude >= 0):
            raise InstructionError(f"motion magnitude must be >= 0, got {self.magnitude!r}")
        object.__setattr__(self, "magnitude", float(self.magnitude))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "magnitude": self.magnitude}

    @classmethod
    def from_dict(cls, d) -> "MotionLabel":
        return cls(d["kind"], d["magnitude"])


def camera_motion(g) -> Tuple[np.ndarray, float]:
    """Displacement of the camera (in the previous camera's frame) and yaw.

    ``g`` maps previous-camera coordinates to current-camera coordinates, so
    the current camera sits at ``-R.T @ t`` in the previous frame and its
    forward axis is the third column of ``R.T``.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (4, 4):
        raise InstructionError(f"transform must be 4x4, got {g.shape}")
    r, t = g[:3, :3], g[:3, 3]
    drift = np.max(np.abs(r.T @ r - np.eye(3)))
    if drift > 1e-6:
        raise InstructionError(f"rotation block is not orthonormal (max drift {drift:.3g})")
    displacement = -r.T @ t
    fwd = r.T[:, 2]
    yaw = math.atan2(-fwd[0], fwd[2])
    return displacement, yaw


def classify_motion(
    g,
    translation_threshold: float = DEFAULT_TRANSLATION_THRESHOLD,
    rotation_threshold: float = DEFAULT_ROTATION_THRESHOLD,
) -> List[MotionLabel]:
    if translation_threshold <= 0 or rotation_threshold <= 0:
        raise InstructionError("motion thresholds must be positive")
    (x, y, z), yaw = camera_motion(g)
    axes = [
        (FORWARD if z > 0 else BACKWARD, abs(z), translation_threshold),
        (RIGHT if x > 0 else LEFT, abs(x), translation_threshold),
        (DOWN if y > 0 else UP, abs(y), translation_threshold),
        (ROTATE_LEFT if yaw > 0 else ROTATE_RIGHT, abs(yaw), rotation_threshold),
    ]
    labels = [MotionLabel(kind, mag) for kind, mag, thr in axes if mag > thr]
    if not labels:
        return [MotionLabel(STATIONARY, 0.0)]
    # stable sort keeps the axis order above for equal magnitudes
    return sorted(labels, key=lambda lab: -lab.magnitude)


def _join(phrases: Sequence[str]) -> str:
    if len(phrases) == 1:
        return phrases[0]
    return ", ".join(phrases[:-1]) + " and " + phrases[-1]


def novel_view_instruction(labels: Sequence[MotionLabel], rewriter: Optional[Rewriter] = None) -> str:
    """Render labels in order; a run of the same label becomes "... repeatedly"."""
    if not labels:
        raise InstructionError("need at least one motion label")
    phrases = []
    run_kind, run_len = None, 0
    for lab in list(labels) + [None]:
        kind = lab.kind if lab is not None else None
        if kind == run_kind:
            run_len += 1
            continue
        if run_kind is not None:
            phrase = PHRASES[run_kind]
            phrases.append(phrase + " repeatedly" if run_len > 1 else phrase)
        run_kind, run_len = kind, 1
    text = _join(phrases)
    return rewriter(text) if rewriter is not None else text


def trajectory_instruction(start_object: str, end_object: str, rewriter: Optional[Rewriter] = None) -> str:
    if not start_object or not start_object.strip():
        raise InstructionError("start object description is empty")
    if not end_object or not end_object.strip():
        raise InstructionError("end object description is empty")
    text = TRAJECTORY_TEMPLATE.format(start=start_object, end=end_object)
    return rewriter(text) if rewriter is not None else text


def parse_trajectory_instruction(text: str) -> Tuple[str, str]:
    """Inverse of :func:`trajectory_instruction`.

    Splits at the last " to ", so only the end object must not contain it.
    """
    m = _TRAJECTORY_RE.match(text)
    if m is None:
        raise InstructionError(f"not a trajectory instruction: {text!r}")
    return m.group(1), m.group(2)


def shot_partition(descriptors: Sequence[Sequence[float]], cut_threshold: float) -> List[int]:
    """Frame indices that start a new shot: 0, plus every i whose descriptor
    differs from descriptor i-1 by more than ``cut_threshold`` in L1."""
    if len(descriptors) == 0:
        raise InstructionError("need at least one frame descriptor")
    lengths = {len(d) for d in descriptors}
    if len(lengths) != 1:
        raise InstructionError(f"descriptor lengths differ: {sorted(lengths)}")
    arr = np.asarray(descriptors, dtype=np.float64)
    jumps = np.abs(np.diff(arr, axis=0)).sum(axis=1)
    return [0] + [int(i) + 1 for i in np.flatnonzero(jumps > cut_threshold)]


def shot_ranges(boundaries: Sequence[int], n_frames: int) -> List[range]:
    bounds = list(boundaries)
    if not bounds or bounds[0] != 0 or any(b >= a for a, b in zip(bounds[1:], bounds)):
        raise InstructionError("shot boundaries must start at 0 and strictly increase")
    ends = bounds[1:] + [n_frames]
    return [range(s, e) for s, e in zip(bounds, ends) if s < n_frames]


def read_shot_boundaries(fh: TextIO) -> List[int]:
    out = []
    for lineno, line in enumerate(fh, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise InstructionError(f"line {lineno}: expected a frame index, got {line!r}") from None
    if 0 not in out:
        out.insert(0, 0)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise InstructionError("shot boundaries must be strictly increasing")
    return out


def read_object_annotations(fh: TextIO) -> Dict[int, str]:
    """``frame_index object description`` per line; later lines win."""
    out: Dict[int, str] = {}
    for lineno, line in enumerate(fh, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        head, _, rest = stripped.partition(" ")
        rest = rest.strip()
        try:
            idx = int(head)
        except ValueError:
            raise InstructionError(f"line {lineno}: bad frame index {head!r}") from None
        if not rest:
            raise InstructionError(f"line {lineno}: missing object description")
        out[idx] = rest
    return out


def nearest_annotation(annotations: Dict[int, str], frame_index: int) -> Optional[str]:
    """Object annotated at the closest frame index (lower index on ties)."""
    if not annotations:
        return None
    best = min(annotations, key=lambda k: (abs(k - frame_index), k))
    return annotations[best]
