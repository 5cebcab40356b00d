"""``geopipe`` command line.

Subcommands: encode, build-graph, plan, generate, stats, gas, noise-demo.
Exit status is 0 on success, 1 when a stage reports an error and 2 on usage
errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from geopipe import dataset_io, gas, plotting
from geopipe.config import PipelineConfig, resolve_config
from geopipe.instructions import read_object_annotations, read_shot_boundaries
from geopipe.manifest import load_manifest
from geopipe.noise import VarianceSchedule
from geopipe.pipeline import generate
from geopipe.repe import encode_sequence, write_embedding_dump
from geopipe.scene_graph import OccupancyCloud, astar, build_graph, load_cloud, sample_endpoints, write_graph

log = logging.getLogger("geopipe")

# flag dest -> PipelineConfig field
_CONFIG_FLAGS = {
    "distance_threshold": float,
    "corridor_radius": float,
    "translation_threshold": float,
    "rotation_threshold": float,
    "cut_threshold": float,
    "coverage_threshold": float,
    "gamma": float,
    "channel_dim": int,
    "min_hops": int,
    "trajectories_per_video": int,
    "view_window": int,
}


def _add_config_flags(p: argparse.ArgumentParser, names) -> None:
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=_CONFIG_FLAGS[name], default=None)


def _config(args) -> PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_FLAGS}
    overrides["seed"] = args.seed
    overrides["threads"] = args.threads
    if getattr(args, "normalize_intrinsics", False):
        overrides["normalize_intrinsics"] = True
    return resolve_config(args.config, overrides)


def _cloud(path) -> OccupancyCloud:
    return load_cloud(path) if path else OccupancyCloud()


def _emit(obj) -> None:
    sys.stdout.write(dataset_io.canonical_json(obj) + "\n")


def cmd_encode(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    embs = encode_sequence(manifest.frames, cfg.frequency)
    with open(args.output, "wb") as fh:
        write_embedding_dump(fh, embs)
    if args.plot:
        plotting.plot_embeddings(np.array(embs), args.plot)
    _emit({"frames": len(embs), "embedding_dim": cfg.frequency.embedding_dim, "output": str(args.output)})
    return 0


def cmd_build_graph(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    cloud = _cloud(args.cloud)
    graph = build_graph(manifest.frames, cloud, cfg.distance_threshold, cfg.corridor_radius, cfg.worker_count)
    with open(args.output, "w", encoding="utf-8") as fh:
        write_graph(fh, graph)
    if args.plot:
        plotting.plot_graph(graph, args.plot, cloud=cloud)
    _emit({"nodes": len(graph), "edges": graph.num_edges, "output": str(args.output)})
    return 0


def cmd_plan(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    cloud = _cloud(args.cloud)
    graph = build_graph(manifest.frames, cloud, cfg.distance_threshold, cfg.corridor_radius, cfg.worker_count)
    if (args.start is None) != (args.goal is None):
        raise ValueError("give both --start and --goal, or neither")
    if args.start is None:
        start, goal = sample_endpoints(graph, cfg.seed, cfg.min_hops)
    else:
        start, goal = args.start, args.goal
    traj = astar(graph, start, goal)
    if args.plot:
        plotting.plot_graph(graph, args.plot, [traj], cloud)
    _emit({"start": start, "goal": goal, "nodes": list(traj.nodes), "cost": traj.cost})
    return 0


def cmd_generate(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    cloud = _cloud(args.cloud)
    with open(args.annotations, encoding="utf-8") as fh:
        annotations = read_object_annotations(fh)
    shots = None
    if args.shots:
        with open(args.shots, encoding="utf-8") as fh:
            shots = read_shot_boundaries(fh)
    descriptors = np.loadtxt(args.descriptors, ndmin=2) if args.descriptors else None

    result = generate(manifest, cloud, annotations, cfg, shots=shots, descriptors=descriptors)
    out = Path(args.output)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        dataset_io.write_dataset(fh, result.records)
    manifest_out = Path(args.manifest_out) if args.manifest_out else out.with_suffix(".manifest.json")
    with open(manifest_out, "w", encoding="utf-8", newline="\n") as fh:
        result.manifest.dump(fh)
    if args.plot_dir:
        plot_dir = Path(args.plot_dir)
        plotting.plot_graph(result.graph, plot_dir / "graph.png", result.trajectories, cloud)
        plotting.plot_instruction_lengths(
            [dataset_io.instruction_length(r.instruction) for r in result.records],
            plot_dir / "instruction_lengths.png",
        )
    _emit({"triplets": len(result.records), "dataset": str(out), "manifest": str(manifest_out)})
    return 0


def cmd_stats(args) -> int:
    videos = None
    if args.manifest:
        with open(args.manifest, encoding="utf-8") as fh:
            videos = dataset_io.DatasetManifest.load(fh).videos
    result = dataset_io.read_dataset_file(args.dataset, videos)
    for w in result.warnings:
        log.warning("%s", w)
    stats = dataset_io.dataset_stats(result.records, videos)
    if args.json:
        _emit(stats.to_dict())
    else:
        sys.stdout.write(stats.format_table() + "\n")
    if args.plot:
        plotting.plot_instruction_lengths(
            [dataset_io.instruction_length(r.instruction) for r in result.records], args.plot
        )
    return 0


def cmd_gas(args) -> int:
    cfg = _config(args)
    with open(args.attention, "rb") as fh:
        attns = gas.read_attention(fh)
    if args.mask.endswith((".png", ".npy", ".jpg", ".bmp")):
        if len(attns) != 1:
            raise gas.GasError("an image mask can only be paired with a single attention record")
        pm = gas.load_mask_image(args.mask)
        mask = gas.mask_from_pixels(pm, (attns[0].rows, attns[0].cols), cfg.coverage_threshold)
        masks = [mask]
    else:
        with open(args.mask, "rb") as fh:
            masks = gas.read_masks(fh)
    report = gas.gas_report(gas.pair_dumps(attns, masks))
    if args.table:
        sys.stdout.write(report.format_table(args.method) + "\n")
    else:
        _emit(report.to_dict())
    if args.plot:
        plotting.plot_gas(report, args.plot)
    return 0


def cmd_noise_demo(args) -> int:
    schedule = VarianceSchedule.linear(args.beta_start, args.beta_end, args.steps)
    for t in range(0, schedule.T + 1, args.every):
        _emit({"t": t, "alpha_bar": float(schedule.alpha_bars[t])})
    if schedule.T % args.every:
        _emit({"t": schedule.T, "alpha_bar": float(schedule.alpha_bars[-1])})
    if args.plot:
        plotting.plot_alpha_bar(schedule, args.plot)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None, help="worker pool size (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="geopipe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="relative pose embeddings for a manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--normalize-intrinsics", action="store_true")
    p.add_argument("--plot", help="write an embedding heatmap here")
    _add_config_flags(p, ["gamma", "channel_dim"])
    p.set_defaults(func=cmd_encode)

    for name, func, help_ in (
        ("build-graph", cmd_build_graph, "export the camera graph"),
        ("plan", cmd_plan, "A* path between two frames"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("manifest")
        p.add_argument("--cloud", help="occupancy points (x y z rows or .npy)")
        p.add_argument("--plot", help="write a top-down graph figure here")
        _add_config_flags(p, ["distance_threshold", "corridor_radius"])
        if name == "build-graph":
            p.add_argument("-o", "--output", required=True)
        else:
            p.add_argument("--start", type=int)
            p.add_argument("--goal", type=int)
            _add_config_flags(p, ["min_hops"])
        p.set_defaults(func=func)

    p = sub.add_parser("generate", parents=[common], help="emit a triplet dataset for one video")
    p.add_argument("manifest")
    p.add_argument("--cloud")
    p.add_argument("--annotations", required=True, help="'frame_index object' lines")
    p.add_argument("--shots", help="external shot boundaries, one frame index per line")
    p.add_argument("--descriptors", help="per-frame descriptor rows for shot detection")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--manifest-out")
    p.add_argument("--plot-dir", help="write graph and instruction-length figures here")
    _add_config_flags(
        p,
        [
            "distance_threshold",
            "corridor_radius",
            "translation_threshold",
            "rotation_threshold",
            "cut_threshold",
            "min_hops",
            "trajectories_per_video",
            "view_window",
        ],
    )
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", parents=[common], help="summary statistics of a dataset file")
    p.add_argument("dataset")
    p.add_argument("--manifest", help="dataset manifest with video entries")
    p.add_argument("--json", action="store_true")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gas", parents=[common], help="grounded attention score report")
    p.add_argument("attention")
    p.add_argument("mask", help="MASK dump, or a pixel mask image / .npy")
    p.add_argument("--table", action="store_true", help="print a Method/GAS table")
    p.add_argument("--method", default="model")
    p.add_argument("--plot")
    _add_config_flags(p, ["coverage_threshold"])
    p.set_defaults(func=cmd_gas)

    p = sub.add_parser("noise-demo", parents=[common], help="(t, alpha_bar) table")
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.02)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--every", type=int, default=100)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_noise_demo)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, LookupError, OSError) as exc:
        sys.stderr.write(f"geopipe {args.command}: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
