"""End-to-end triplet generation for one video."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from geopipe.config import PipelineConfig
from geopipe.dataset_io import DatasetManifest, TripletRecord, VideoEntry, dataset_stats
from geopipe.geometry import CalibratedFrame, relative_pose
from geopipe.instructions import (
    STATIONARY,
    Rewriter,
    classify_motion,
    nearest_annotation,
    novel_view_instruction,
    shot_partition,
    shot_ranges,
    trajectory_instruction,
)
from geopipe.manifest import PoseManifest
from geopipe.scene_graph import CameraGraph, OccupancyCloud, Trajectory, astar, build_graph, sample_endpoints

log = logging.getLogger(__name__)


@dataclass
class GenerationResult:
    records: List[TripletRecord]
    graph: CameraGraph
    trajectories: List[Trajectory]
    shots: List[int]
    manifest: DatasetManifest


def pose_descriptors(frames: Sequence[CalibratedFrame]) -> np.ndarray:
    """Camera center and forward axis per frame; a tracking jump shows up as a
    large L1 step between neighbours."""
    rows = []
    for f in frames:
        w2c = f.pose.to_w2c()
        rows.append(np.concatenate([f.center, w2c.r[2]]))
    return np.array(rows)


def novel_view_records(
    frames: Sequence[CalibratedFrame],
    shots: Sequence[int],
    video_id: str,
    config: PipelineConfig,
    rewriter: Optional[Rewriter] = None,
) -> List[TripletRecord]:
    """Slide a window over each shot; the dominant motion of each step in the
    window becomes one label, stationary steps are dropped."""
    out = []
    step = config.view_window - 1
    for shot in shot_ranges(shots, len(frames)):
        for s in range(shot.start, shot.stop - 1, step):
            window = frames[s : min(s + config.view_window, shot.stop)]
            labels = []
            for prev, cur in zip(window[:-1], window[1:]):
                lab = classify_motion(
                    relative_pose(cur, prev), config.translation_threshold, config.rotation_threshold
                )[0]
                if lab.kind != STATIONARY:
                    labels.append(lab)
            if not labels:
                continue
            out.append(
                TripletRecord(
                    id=f"{video_id}-nv-{len(out):05d}",
                    video_id=video_id,
                    task="novel_view",
                    observation_frames=(window[0].frame_index,),
                    instruction=novel_view_instruction(labels, rewriter),
                    outcome_frames=tuple(f.frame_index for f in window[1:]),
                    motion_labels=tuple(labels),
                )
            )
    return out


def sample_trajectories(graph: CameraGraph, config: PipelineConfig) -> List[Trajectory]:
    pairs: List[Tuple[int, int]] = []
    for k in range(config.trajectories_per_video):
        pair = sample_endpoints(graph, seed=np.random.SeedSequence([config.seed, k]), min_hops=config.min_hops)
        if pair not in pairs:
            pairs.append(pair)
    workers = config.worker_count
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: astar(graph, *p), pairs))
    return [astar(graph, *p) for p in pairs]


def trajectory_records(
    trajectories: Sequence[Trajectory],
    annotations: Dict[int, str],
    video_id: str,
    rewriter: Optional[Rewriter] = None,
) -> List[TripletRecord]:
    out = []
    for traj in trajectories:
        start, goal = traj.nodes[0], traj.nodes[-1]
        start_obj = nearest_annotation(annotations, start) or f"the view at frame {start}"
        goal_obj = nearest_annotation(annotations, goal) or f"the view at frame {goal}"
        out.append(
            TripletRecord(
                id=f"{video_id}-traj-{len(out):05d}",
                video_id=video_id,
                task="trajectory",
                observation_frames=(start,),
                instruction=trajectory_instruction(start_obj, goal_obj, rewriter),
                outcome_frames=traj.nodes,
                trajectory=traj,
            )
        )
    return out


def generate(
    manifest: PoseManifest,
    cloud: Optional[OccupancyCloud],
    annotations: Dict[int, str],
    config: PipelineConfig,
    shots: Optional[Sequence[int]] = None,
    descriptors: Optional[np.ndarray] = None,
    rewriter: Optional[Rewriter] = None,
) -> GenerationResult:
    frames = manifest.frames
    if shots is None:
        desc = descriptors if descriptors is not None else pose_descriptors(frames)
        if len(desc) != len(frames):
            raise ValueError(f"{len(desc)} descriptors for {len(frames)} frames")
        shots = shot_partition(desc, config.cut_threshold)
    log.info("video %s: %d frames, %d shots", manifest.video_id, len(frames), len(shots))

    records = novel_view_records(frames, shots, manifest.video_id, config, rewriter)
    graph = build_graph(
        frames, cloud, config.distance_threshold, config.corridor_radius, threads=config.worker_count
    )
    log.info("graph: %d nodes, %d edges", len(graph), graph.num_edges)
    trajectories = sample_trajectories(graph, config)
    records += trajectory_records(trajectories, annotations, manifest.video_id, rewriter)

    video = VideoEntry(manifest.video_id, len(frames), manifest.source, manifest.duration_s)
    stats = dataset_stats(records, [video])
    dm = DatasetManifest(videos=[video], triplet_count=len(records), stats=stats.to_dict())
    return GenerationResult(records, graph, trajectories, list(shots), dm)
