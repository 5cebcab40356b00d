import io
import json
from pathlib import Path

import numpy as np
import pytest

from geopipe import gas
from geopipe.cli import main
from geopipe.dataset_io import DatasetManifest, read_dataset_file
from geopipe.geometry import CalibratedFrame, CameraIntrinsics, RigidPose
from geopipe.manifest import PoseManifest, write_manifest
from geopipe.repe import read_embedding_dump

DATA = Path(__file__).parent / "data"
MANIFEST = str(DATA / "line4.manifest.jsonl")
OBJECTS = str(DATA / "line4.objects.txt")
CLOUD = str(DATA / "line4.cloud.txt")


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


def _static_manifest(path, n):
    k = CameraIntrinsics.from_focal(500.0, 500.0, 320.0, 240.0)
    pose = RigidPose(np.eye(3), np.array([0.3, -0.2, 1.5]), "w2c")
    frames = [CalibratedFrame(i, k, pose) for i in range(n)]
    with open(path, "w") as fh:
        write_manifest(fh, PoseManifest(frames, "w2c"))


def test_encode_single_frame_identity(tmp_path, capsys):
    src = tmp_path / "one.jsonl"
    k = CameraIntrinsics.identity()
    with open(src, "w") as fh:
        write_manifest(fh, PoseManifest([CalibratedFrame(0, k, RigidPose.identity())], "w2c"))
    rc, out, _ = run(capsys, "encode", src, "-o", tmp_path / "e.bin", "--channel-dim", 1024)
    assert rc == 0 and json.loads(out)["frames"] == 1
    with open(tmp_path / "e.bin", "rb") as fh:
        emb = read_embedding_dump(fh)
    assert emb.shape == (1, 1024)


def test_encode_static_sequence(tmp_path, capsys):
    src = tmp_path / "static.jsonl"
    _static_manifest(src, 5)
    rc, _, _ = run(capsys, "encode", src, "-o", tmp_path / "e.bin", "--plot", tmp_path / "e.png")
    assert rc == 0 and (tmp_path / "e.png").stat().st_size > 0
    with open(tmp_path / "e.bin", "rb") as fh:
        emb = read_embedding_dump(fh)
    for row in emb[2:]:
        np.testing.assert_array_equal(row, emb[1])


def test_generate_line(tmp_path, capsys):
    out = tmp_path / "d.jsonl"
    rc, stdout, _ = run(
        capsys, "generate", MANIFEST, "--cloud", CLOUD, "--annotations", OBJECTS, "-o", out,
        "--plot-dir", tmp_path / "figs",
    )
    assert rc == 0
    dm = DatasetManifest.load(open(tmp_path / "d.manifest.json"))
    res = read_dataset_file(out, dm.videos)
    trajs = [r for r in res.records if r.task == "trajectory"]
    assert any(tuple(r.outcome_frames) == (0, 1, 2, 3) for r in trajs)
    fwd = next(r for r in trajs if r.outcome_frames[0] == 0)
    assert fwd.instruction == "Please show me the path from the pillows on the bed to the dresser."
    assert dm.triplet_count == len(res.records)
    assert (tmp_path / "figs" / "graph.png").exists()
    assert (tmp_path / "figs" / "instruction_lengths.png").exists()


def test_generate_deterministic_across_threads(tmp_path, capsys):
    blobs = []
    for i, threads in enumerate((1, 8, 8)):
        out = tmp_path / f"d{i}.jsonl"
        rc, _, _ = run(
            capsys, "generate", MANIFEST, "--cloud", CLOUD, "--annotations", OBJECTS, "-o", out,
            "--threads", threads, "--seed", 3,
        )
        assert rc == 0
        blobs.append((out.read_bytes(), (tmp_path / f"d{i}.manifest.json").read_bytes()))
    assert blobs[0] == blobs[1] == blobs[2]


def test_generate_zero_threshold_fails(tmp_path, capsys):
    rc, _, err = run(
        capsys, "generate", MANIFEST, "--annotations", OBJECTS, "-o", tmp_path / "d.jsonl",
        "--distance-threshold", 0,
    )
    assert rc != 0 and "distance_threshold" in err


def test_stats_table(tmp_path, capsys):
    out = tmp_path / "d.jsonl"
    run(capsys, "generate", MANIFEST, "--cloud", CLOUD, "--annotations", OBJECTS, "-o", out)
    rc, table, _ = run(capsys, "stats", out, "--manifest", tmp_path / "d.manifest.json")
    assert rc == 0
    assert "Number of videos" in table and "Total annotations triplets" in table
    rc, js, _ = run(capsys, "stats", out, "--json")
    assert json.loads(js)["triplet_count"] >= 1


def test_build_graph_and_plan(tmp_path, capsys):
    rc, out, _ = run(capsys, "build-graph", MANIFEST, "--cloud", CLOUD, "-o", tmp_path / "g.txt")
    assert rc == 0 and json.loads(out)["edges"] == 3
    rc, out, _ = run(capsys, "plan", MANIFEST, "--start", 0, "--goal", 3, "--plot", tmp_path / "p.png")
    assert rc == 0 and json.loads(out)["nodes"] == [0, 1, 2, 3]
    rc, _, err = run(capsys, "plan", MANIFEST, "--start", 0, "--goal", 3, "--distance-threshold", 0.1)
    assert rc == 1 and "error" in err


def _dumps(tmp_path, rng, n=4):
    attns, masks = [], []
    a_path, m_path = tmp_path / "a.bin", tmp_path / "m.bin"
    with open(a_path, "wb") as fa, open(m_path, "wb") as fm:
        for i in range(n):
            a = gas.AttentionMap.from_array(rng.random((2, 6, 5)), f"pair{i}")
            m = gas.RegionMask.from_array(rng.random((2, 6, 5)) < 0.4, f"pair{i}")
            gas.write_attention(fa, a)
            gas.write_mask(fm, m)
            attns.append(a)
            masks.append(m)
    # the dump stores float32 weights, so compare against what was written
    with open(a_path, "rb") as fa, open(m_path, "rb") as fm:
        pairs = gas.pair_dumps(gas.read_attention(fa), gas.read_masks(fm))
    return a_path, m_path, gas.gas_report(pairs)


def test_gas_report_matches_library(tmp_path, capsys, rng):
    a_path, m_path, expected = _dumps(tmp_path, rng)
    rc, out, _ = run(capsys, "gas", a_path, m_path)
    got = json.loads(out)
    assert rc == 0
    assert got["GAS"]["mean"] == pytest.approx(expected.mean, abs=1e-12)
    assert got["GAS"]["pooled"] == pytest.approx(expected.pooled, abs=1e-12)
    rc, out, _ = run(capsys, "gas", a_path, m_path, "--table", "--method", "ours", "--plot", tmp_path / "g.png")
    assert "GAS" in out.splitlines()[0] and "ours" in out


def test_gas_full_mask(tmp_path, capsys, rng):
    a_path = tmp_path / "a.bin"
    with open(a_path, "wb") as fh:
        gas.write_attention(fh, gas.AttentionMap.from_array(rng.random((1, 4, 4))))
    np.save(tmp_path / "full.npy", np.ones((64, 64), dtype=bool))
    rc, out, _ = run(capsys, "gas", a_path, tmp_path / "full.npy")
    assert rc == 0 and json.loads(out)["GAS"]["mean"] == 1.0


def test_noise_demo(capsys, tmp_path):
    rc, out, _ = run(capsys, "noise-demo", "--every", 250, "--plot", tmp_path / "n.png")
    rows = [json.loads(l) for l in out.splitlines()]
    assert rc == 0 and [r["t"] for r in rows] == [0, 250, 500, 750, 1000]
    assert rows[0]["alpha_bar"] == 1.0
    assert all(a["alpha_bar"] > b["alpha_bar"] for a, b in zip(rows, rows[1:]))


def test_bad_manifest_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    lines = Path(MANIFEST).read_text().splitlines()
    lines[2] = lines[2][:-5]
    bad.write_text("\n".join(lines) + "\n")
    rc, _, err = run(capsys, "encode", bad, "-o", tmp_path / "e.bin")
    assert rc == 1 and "line 3" in err


def test_env_config(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GEOPIPE_DISTANCE_THRESHOLD", "0.1")
    rc, out, _ = run(capsys, "build-graph", MANIFEST, "-o", tmp_path / "g.txt")
    assert rc == 0 and json.loads(out)["edges"] == 0
    rc, out, _ = run(capsys, "build-graph", MANIFEST, "-o", tmp_path / "g.txt", "--distance-threshold", 0.5)
    assert json.loads(out)["edges"] == 3
