import numpy as np
import pytest

from geopipe.geometry import CalibratedFrame, CameraIntrinsics, RigidPose, random_rotation


def random_intrinsics(rng):
    f = rng.uniform(200, 900, size=2)
    c = rng.uniform(100, 500, size=2)
    return CameraIntrinsics.from_focal(f[0], f[1], c[0], c[1], skew=rng.uniform(-1, 1))


def random_pose(rng, convention="w2c", scale=3.0):
    return RigidPose(random_rotation(rng), rng.uniform(-scale, scale, 3), convention)


def random_frame(rng, index=0, convention="w2c"):
    return CalibratedFrame(index, random_intrinsics(rng), random_pose(rng, convention))


def random_sequence(rng, n=5, convention="w2c"):
    return [random_frame(rng, i, convention) for i in range(n)]


def rebase(frames, s):
    """Apply the world change x' = S x to every w2c pose: T' = T S^-1."""
    s_inv = np.linalg.inv(s)
    out = []
    for f in frames:
        m = f.pose.to_w2c().matrix @ s_inv
        out.append(CalibratedFrame(f.frame_index, f.intrinsics, RigidPose.from_matrix(m, "w2c")))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
