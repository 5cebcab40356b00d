import numpy as np
import pytest

from geopipe.geometry import (
    CalibratedFrame,
    CameraIntrinsics,
    DegenerateIntrinsicsError,
    GeometryError,
    RigidPose,
    camera_center,
    first_frame_transform,
    homogeneous_projection,
    invert_pose,
    is_homogeneous,
    projection_inverse,
    random_rotation,
    relative_transform,
)

from conftest import random_frame, random_pose, random_sequence, rebase


def lift(k):
    out = np.eye(4)
    out[:3, :3] = k
    return out


def frame(k=None, r=None, t=(0, 0, 0), idx=0, convention="w2c"):
    k = np.eye(3) if k is None else k
    r = np.eye(3) if r is None else r
    return CalibratedFrame(idx, CameraIntrinsics(k), RigidPose(r, t, convention))


class TestHomogeneousProjection:
    def test_identity(self):
        np.testing.assert_array_equal(homogeneous_projection(frame()), np.eye(4))

    def test_pure_translation(self):
        p = homogeneous_projection(frame(t=(1, 2, 3)))
        np.testing.assert_array_equal(p[:3, :3], np.eye(3))
        np.testing.assert_array_equal(p[:, 3], [1, 2, 3, 1])

    def test_factors_recovered(self, rng):
        for _ in range(50):
            f = random_frame(rng)
            p = homogeneous_projection(f)
            # independent inverse of the pose factor by general elimination
            pose_inv = np.linalg.inv(f.pose.matrix)
            np.testing.assert_allclose(p @ pose_inv, lift(f.intrinsics.k), rtol=1e-9, atol=1e-9)
            assert is_homogeneous(p)

    def test_c2w_converted(self, rng):
        f = random_frame(rng, convention="c2w")
        expected = lift(f.intrinsics.k) @ np.linalg.inv(f.pose.matrix)
        np.testing.assert_allclose(homogeneous_projection(f), expected, rtol=1e-9, atol=1e-9)

    def test_closed_form_inverse(self, rng):
        f = random_frame(rng)
        np.testing.assert_allclose(
            projection_inverse(f) @ homogeneous_projection(f), np.eye(4), atol=1e-9
        )

    def test_degenerate_intrinsics(self):
        bad = frame(k=np.diag([1.0, 0.0, 1.0]), idx=7)
        with pytest.raises(DegenerateIntrinsicsError, match="degenerate intrinsics"):
            homogeneous_projection(bad)


class TestRelativeTransform:
    def test_same_frame_is_identity(self, rng):
        f = random_frame(rng)
        np.testing.assert_allclose(relative_transform(f, f), np.eye(4), atol=1e-9)

    def test_pure_translation(self):
        g = relative_transform(frame(t=(1, 0, 0), idx=1), frame(idx=0))
        np.testing.assert_allclose(g[:3, :3], np.eye(3), atol=1e-15)
        np.testing.assert_allclose(g[:, 3], [1, 0, 0, 1], atol=1e-15)

    def test_maps_previous_projection_onto_current(self, rng):
        for _ in range(100):
            prev, cur = random_frame(rng, 0), random_frame(rng, 1)
            g = relative_transform(cur, prev)
            np.testing.assert_allclose(
                g @ homogeneous_projection(prev), homogeneous_projection(cur), rtol=1e-9, atol=1e-9
            )
            np.testing.assert_allclose(g[3], [0, 0, 0, 1], atol=1e-12)

    def test_error_names_frame(self):
        good = frame(idx=3)
        bad = frame(k=np.array([[1.0, 2.0, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]]), idx=11)
        with pytest.raises(DegenerateIntrinsicsError, match="frame 11"):
            relative_transform(good, bad)
        with pytest.raises(DegenerateIntrinsicsError, match="frame 11"):
            relative_transform(bad, good)


class TestFirstFrame:
    def test_identity(self):
        np.testing.assert_array_equal(first_frame_transform(frame()), np.eye(4))

    def test_scaled_intrinsics(self):
        g = first_frame_transform(frame(k=np.diag([2.0, 2.0, 1.0])))
        np.testing.assert_array_equal(g, np.diag([2.0, 2.0, 1.0, 1.0]))

    def test_matches_reference_camera(self, rng):
        for _ in range(20):
            f = random_frame(rng)
            np.testing.assert_allclose(
                first_frame_transform(f),
                relative_transform(f, CalibratedFrame.reference()),
                rtol=1e-12,
                atol=1e-12,
            )


class TestPoses:
    def test_center_identity(self):
        np.testing.assert_array_equal(camera_center(RigidPose.identity()), [0, 0, 0])

    def test_center_translation(self):
        np.testing.assert_array_equal(camera_center(RigidPose(np.eye(3), [1, 2, 3])), [-1, -2, -3])

    def test_center_c2w(self):
        np.testing.assert_array_equal(camera_center(RigidPose(np.eye(3), [1, 2, 3], "c2w")), [1, 2, 3])

    def test_center_residual(self, rng):
        for _ in range(100):
            p = random_pose(rng)
            c = camera_center(p)
            assert np.linalg.norm(p.r @ c + p.t) < 1e-9

    def test_invert_identity(self):
        inv = invert_pose(RigidPose.identity())
        np.testing.assert_array_equal(inv.matrix, np.eye(4))

    def test_invert_translation(self):
        inv = invert_pose(RigidPose(np.eye(3), [1, 0, 0]))
        np.testing.assert_array_equal(inv.t, [-1, 0, 0])
        np.testing.assert_array_equal(inv.r, np.eye(3))

    def test_invert_composition(self, rng):
        for _ in range(100):
            p = random_pose(rng)
            both = p.compose(invert_pose(p))
            assert np.max(np.abs(both.matrix - np.eye(4))) < 1e-9
            both = invert_pose(p).compose(p)
            assert np.max(np.abs(both.matrix - np.eye(4))) < 1e-9

    def test_rotation_stays_orthonormal(self, rng):
        p = random_pose(rng)
        for _ in range(200):
            p = p.compose(invert_pose(random_pose(rng))).compose(random_pose(rng))
        assert np.max(np.abs(p.r.T @ p.r - np.eye(3))) < 1e-9

    def test_rejects_non_rotation(self):
        with pytest.raises(GeometryError):
            RigidPose(np.diag([1.0, 1.0, -1.0]), [0, 0, 0])
        with pytest.raises(GeometryError):
            RigidPose(np.eye(3) * 1.01, [0, 0, 0])

    def test_rejects_bad_intrinsics(self):
        with pytest.raises(GeometryError):
            CameraIntrinsics(np.diag([1.0, 1.0, 2.0]))

    def test_convention_round_trip(self, rng):
        p = random_pose(rng)
        back = p.to_c2w().to_w2c()
        np.testing.assert_allclose(back.matrix, p.matrix, atol=1e-12)
        np.testing.assert_allclose(camera_center(p.to_c2w()), camera_center(p), atol=1e-12)

    def test_closed_form_intrinsics_inverse(self, rng):
        k = CameraIntrinsics.from_focal(512.3, 498.1, 320.5, 241.2, skew=0.7)
        np.testing.assert_allclose(k.inverse() @ k.k, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(k.inverse(), np.linalg.inv(k.k), rtol=1e-12)


class TestSequenceProperties:
    def test_world_frame_invariance(self, rng):
        for _ in range(50):
            frames = random_sequence(rng, 5)
            s = random_pose(rng).matrix
            moved = rebase(frames, s)
            for i in range(1, 5):
                np.testing.assert_allclose(
                    relative_transform(moved[i], moved[i - 1]),
                    relative_transform(frames[i], frames[i - 1]),
                    rtol=1e-9,
                    atol=1e-9,
                )
            # the first frame is anchored to the world, so it must move
            assert not np.allclose(first_frame_transform(moved[0]), first_frame_transform(frames[0]))

    def test_telescoping(self, rng):
        for _ in range(50):
            frames = random_sequence(rng, 6)
            acc = first_frame_transform(frames[0])
            for i in range(1, 6):
                acc = relative_transform(frames[i], frames[i - 1]) @ acc
                np.testing.assert_allclose(acc, homogeneous_projection(frames[i]), rtol=1e-9, atol=1e-9)

    def test_inverse_symmetry(self, rng):
        for _ in range(50):
            a, b = random_frame(rng, 0), random_frame(rng, 1)
            np.testing.assert_allclose(
                relative_transform(a, b) @ relative_transform(b, a), np.eye(4), atol=1e-9
            )


def test_random_rotation_is_proper(rng):
    for _ in range(100):
        r = random_rotation(rng)
        assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-12
        assert abs(np.linalg.det(r) - 1) < 1e-12


def test_normalized_intrinsics(rng):
    k = CameraIntrinsics.from_focal(500, 400, 320, 240)
    n = k.normalized(640, 480)
    np.testing.assert_allclose(n.k, [[500 / 640, 0, 0.5], [0, 400 / 480, 0.5], [0, 0, 1]])
    f = CalibratedFrame(0, k, RigidPose.identity(), image_size=(640, 480))
    np.testing.assert_allclose(homogeneous_projection(f, normalize_intrinsics=True)[:3, :3], n.k)
    with pytest.raises(GeometryError, match="image size"):
        homogeneous_projection(CalibratedFrame(0, k, RigidPose.identity()), normalize_intrinsics=True)
