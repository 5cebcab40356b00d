"""Observation-action-outcome triplet records: canonical serialization,
reading, validation and summary statistics.

Canonical form of a record is a single JSON object on one line, keys sorted,
separators ``,`` and ``:`` with no padding, non-ASCII kept as UTF-8, floats in
Python's shortest round-trip repr, optional fields omitted when absent. The
first line of a dataset file is a header object carrying ``format_version``
(and ``triplet_count`` when the writer knew it up front).
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from typing import IO, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

from geopipe.instructions import MotionLabel
from geopipe.scene_graph import Trajectory

FORMAT_VERSION = 1
TASKS = ("novel_view", "trajectory")
SOURCES = ("scanned", "internet")


class DatasetError(ValueError):
    def __init__(self, message, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass(frozen=True)
class TripletRecord:
    id: str
    video_id: str
    task: str
    observation_frames: Tuple[int, ...]
    instruction: str
    outcome_frames: Tuple[int, ...]
    motion_labels: Optional[Tuple[MotionLabel, ...]] = None
    trajectory: Optional[Trajectory] = None

    def __post_init__(self):
        object.__setattr__(self, "observation_frames", tuple(self.observation_frames))
        object.__setattr__(self, "outcome_frames", tuple(self.outcome_frames))
        if self.motion_labels is not None:
            object.__setattr__(self, "motion_labels", tuple(self.motion_labels))

    def violations(self) -> List[str]:
        out = []
        if not self.id:
            out.append("id must be nonempty")
        if not self.video_id:
            out.append("video_id must be nonempty")
        if self.task not in TASKS:
            out.append(f"task must be one of {TASKS}, got {self.task!r}")
        if not self.instruction or not self.instruction.strip():
            out.append("instruction must be nonempty")
        if not self.observation_frames:
            out.append("observation_frames must be nonempty")
        if not self.outcome_frames:
            out.append("outcome_frames must be nonempty")
        for name in ("observation_frames", "outcome_frames"):
            if any(not isinstance(i, int) or isinstance(i, bool) or i < 0 for i in getattr(self, name)):
                out.append(f"{name} must hold non-negative integers")
        if self.task == "trajectory":
            if self.trajectory is None:
                out.append("trajectory task requires a trajectory")
            elif tuple(self.trajectory.nodes) != self.outcome_frames:
                out.append("outcome_frames must equal the trajectory node sequence")
        return out

    def validate(self) -> "TripletRecord":
        problems = self.violations()
        if problems:
            raise DatasetError(f"invalid record {self.id!r}: " + "; ".join(problems))
        return self

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "video_id": self.video_id,
            "task": self.task,
            "observation_frames": list(self.observation_frames),
            "instruction": self.instruction,
            "outcome_frames": list(self.outcome_frames),
        }
        if self.motion_labels is not None:
            d["motion_labels"] = [m.to_dict() for m in self.motion_labels]
        if self.trajectory is not None:
            d["trajectory"] = {"nodes": list(self.trajectory.nodes), "cost": self.trajectory.cost}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TripletRecord":
        labels = d.get("motion_labels")
        traj = d.get("trajectory")
        return cls(
            id=d["id"],
            video_id=d["video_id"],
            task=d["task"],
            observation_frames=tuple(d["observation_frames"]),
            instruction=d["instruction"],
            outcome_frames=tuple(d["outcome_frames"]),
            motion_labels=None if labels is None else tuple(MotionLabel.from_dict(m) for m in labels),
            trajectory=None if traj is None else Trajectory(tuple(traj["nodes"]), traj["cost"]),
        )

    def serialize(self) -> str:
        return canonical_json(self.validate().to_dict())


def parse_record(line: str, lineno: Optional[int] = None) -> TripletRecord:
    try:
        d = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed record ({exc.msg})", lineno) from None
    if not isinstance(d, dict):
        raise DatasetError("record is not an object", lineno)
    try:
        rec = TripletRecord.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"bad record fields ({exc})", lineno) from None
    problems = rec.violations()
    if problems:
        raise DatasetError("; ".join(problems), lineno)
    return rec


def emit_triplet(record: TripletRecord, sink: IO[str]) -> str:
    """Validate, serialize and append one record line to ``sink``."""
    line = record.serialize()
    sink.write(line + "\n")
    return line


def write_header(sink: IO[str], triplet_count: Optional[int] = None) -> None:
    header = {"format_version": FORMAT_VERSION}
    if triplet_count is not None:
        header["triplet_count"] = triplet_count
    sink.write(canonical_json(header) + "\n")


def write_dataset(sink: IO[str], records: Sequence[TripletRecord]) -> None:
    write_header(sink, len(records))
    for rec in records:
        emit_triplet(rec, sink)


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    frame_count: int
    source: str
    duration_s: Optional[float] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise DatasetError(f"video source must be one of {SOURCES}, got {self.source!r}")

    def to_dict(self) -> dict:
        d = {"video_id": self.video_id, "frame_count": self.frame_count, "source": self.source}
        if self.duration_s is not None:
            d["duration_s"] = self.duration_s
        return d

    @classmethod
    def from_dict(cls, d) -> "VideoEntry":
        return cls(d["video_id"], int(d["frame_count"]), d["source"], d.get("duration_s"))


@dataclass
class DatasetManifest:
    videos: List[VideoEntry] = field(default_factory=list)
    triplet_count: int = 0
    format_version: int = FORMAT_VERSION
    stats: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {
            "format_version": self.format_version,
            "triplet_count": self.triplet_count,
            "videos": [v.to_dict() for v in self.videos],
        }
        if self.stats is not None:
            d["stats"] = self.stats
        return d

    @classmethod
    def from_dict(cls, d) -> "DatasetManifest":
        return cls(
            videos=[VideoEntry.from_dict(v) for v in d.get("videos", [])],
            triplet_count=int(d.get("triplet_count", 0)),
            format_version=int(d.get("format_version", FORMAT_VERSION)),
            stats=d.get("stats"),
        )

    def dump(self, fh: TextIO) -> None:
        fh.write(canonical_json(self.to_dict()) + "\n")

    @classmethod
    def load(cls, fh: TextIO) -> "DatasetManifest":
        return cls.from_dict(json.loads(fh.read()))


@dataclass
class DatasetReadResult:
    records: List[TripletRecord]
    manifest: DatasetManifest
    warnings: List[str] = field(default_factory=list)


def read_dataset(source: Iterable[str], videos: Optional[Sequence[VideoEntry]] = None) -> DatasetReadResult:
    """Parse a dataset file (any iterable of lines).

    Malformed lines raise :class:`DatasetError` carrying the 1-based line
    number. A ``triplet_count`` in the header that disagrees with the records
    is reported in ``warnings`` rather than raised.
    """
    lines = iter(source)
    try:
        first = next(lines)
    except StopIteration:
        raise DatasetError("missing header line", 1) from None
    if not first.endswith("\n"):
        # a header with no newline means the file was cut right after it
        raise DatasetError("truncated header", 1)
    try:
        header = json.loads(first)
    except json.JSONDecodeError:
        raise DatasetError("header is not a JSON object", 1) from None
    if not isinstance(header, dict) or "format_version" not in header:
        raise DatasetError("header lacks format_version", 1)
    if header["format_version"] != FORMAT_VERSION:
        raise DatasetError(f"unsupported format_version {header['format_version']!r}", 1)

    records = []
    for lineno, line in enumerate(lines, start=2):
        if not line.endswith("\n"):
            raise DatasetError("truncated final line (no newline)", lineno)
        if not line.strip():
            continue
        records.append(parse_record(line, lineno))

    warnings = []
    declared = header.get("triplet_count")
    if declared is not None and declared != len(records):
        warnings.append(f"header declares {declared} triplets but file holds {len(records)}")
    manifest = DatasetManifest(
        videos=list(videos) if videos is not None else [], triplet_count=len(records)
    )
    return DatasetReadResult(records, manifest, warnings)


def read_dataset_file(path, videos: Optional[Sequence[VideoEntry]] = None) -> DatasetReadResult:
    with open(path, encoding="utf-8", newline="") as fh:
        return read_dataset(fh, videos)


def instruction_length(text: str) -> int:
    return len(text.split())


@dataclass
class DatasetStats:
    triplet_count: int
    triplets_by_source: Dict[str, int]
    video_count: int
    videos_by_source: Dict[str, int]
    instruction_length_avg: Optional[float]
    instruction_length_max: Optional[int]
    duration_avg: Optional[float] = None
    duration_max: Optional[float] = None
    triplets_by_task: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "triplet_count": self.triplet_count,
            "triplets_by_source": dict(self.triplets_by_source),
            "triplets_by_task": dict(self.triplets_by_task),
            "video_count": self.video_count,
            "videos_by_source": dict(self.videos_by_source),
            "instruction_length_avg": self.instruction_length_avg,
            "instruction_length_max": self.instruction_length_max,
            "duration_avg": self.duration_avg,
            "duration_max": self.duration_max,
        }

    def format_table(self) -> str:
        def pair(a, b, fmt):
            if a is None:
                return "n/a"
            return f"{format(a, fmt)} / {format(b, fmt if isinstance(b, float) else 'd')}"

        rows = [
            ("Number of videos", f"{self.video_count:,}"),
            ("  - Scanned 3D assets", str(self.videos_by_source.get("scanned", 0))),
            ("  - Internet videos", str(self.videos_by_source.get("internet", 0))),
            ("Video Length (Seconds, avg/max)", pair(self.duration_avg, self.duration_max, ".1f")),
            ("Total annotations triplets", f"{self.triplet_count:,}"),
            ("  - Scanned 3D assets", str(self.triplets_by_source.get("scanned", 0))),
            ("  - Internet videos", str(self.triplets_by_source.get("internet", 0))),
            (
                "Instruction Length (avg/max)",
                pair(self.instruction_length_avg, self.instruction_length_max, ".1f"),
            ),
        ]
        width = max(len(r[0]) for r in rows) + 2
        lines = [f"{'Statistics':<{width}}Value"]
        lines += [f"{label:<{width}}{value}" for label, value in rows]
        return "\n".join(lines)


def dataset_stats(
    records: Sequence[TripletRecord], videos: Optional[Sequence[VideoEntry]] = None
) -> DatasetStats:
    videos = list(videos or [])
    source_of = {v.video_id: v.source for v in videos}
    by_source = {s: 0 for s in SOURCES}
    by_task = {t: 0 for t in TASKS}
    for rec in records:
        src = source_of.get(rec.video_id)
        if src is not None:
            by_source[src] += 1
        by_task[rec.task] = by_task.get(rec.task, 0) + 1
    lengths = [instruction_length(r.instruction) for r in records]
    durations = [v.duration_s for v in videos if v.duration_s is not None]
    return DatasetStats(
        triplet_count=len(records),
        triplets_by_source=by_source,
        triplets_by_task=by_task,
        video_count=len(videos),
        videos_by_source={s: sum(v.source == s for v in videos) for s in SOURCES},
        instruction_length_avg=statistics.fmean(lengths) if lengths else None,
        instruction_length_max=max(lengths) if lengths else None,
        duration_avg=statistics.fmean(durations) if durations else None,
        duration_max=max(durations) if durations else None,
    )
