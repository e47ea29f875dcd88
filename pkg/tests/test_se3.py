"""Pose algebra: composition, inversion, the camera chain, and slerp."""

import math

import numpy as np
import pytest

from conftest import quat_close, random_pose, random_quaternion, random_vec3

from handover_sim.se3 import (
    CameraIntrinsics,
    FrameMismatchError,
    FrameTag,
    Pose,
    UnitQuaternion,
    Vec3,
    back_project,
    compose,
    grasp_target,
    hand_in_base,
    invert,
    slerp,
)

ROT90Z = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.pi / 2.0)


class TestQuaternion:
    def test_canonical_sign_flips_negative_w(self):
        q = UnitQuaternion(-0.5, 0.5, 0.5, 0.5)
        assert q.w == 0.5
        assert (q.x, q.y, q.z) == (-0.5, -0.5, -0.5)

    def test_canonical_sign_on_zero_w(self):
        q = UnitQuaternion(0.0, 0.0, 0.0, -1.0)
        assert (q.w, q.x, q.y, q.z) == (0.0, 0.0, 0.0, 1.0)

    def test_renormalizes_drifted_input(self):
        q = UnitQuaternion(2.0, 0.0, 0.0, 0.0)
        assert (q.w, q.x, q.y, q.z) == (1.0, 0.0, 0.0, 0.0)

    def test_clean_input_is_not_perturbed(self):
        w, z = math.cos(0.3), math.sin(0.3)
        q = UnitQuaternion(w, 0.0, 0.0, z)
        assert q.w == w and q.z == z

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            UnitQuaternion(0.0, 0.0, 0.0, 0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            UnitQuaternion(float("nan"), 0.0, 0.0, 1.0)

    def test_rotate_matches_matrix(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            q = random_quaternion(rng)
            v = random_vec3(rng)
            got = q.rotate(v).as_array()
            want = q.to_matrix() @ v.as_array()
            assert np.max(np.abs(got - want)) < 1e-12

    def test_from_matrix_round_trip_all_branches(self):
        # Near-half-turns about each axis exercise every Shepperd branch.
        cases = [
            UnitQuaternion.identity(),
            UnitQuaternion.from_axis_angle(Vec3(1.0, 0.0, 0.0), 3.1),
            UnitQuaternion.from_axis_angle(Vec3(0.0, 1.0, 0.0), 3.1),
            UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 3.1),
        ]
        rng = np.random.default_rng(12)
        cases += [random_quaternion(rng) for _ in range(50)]
        for q in cases:
            back = UnitQuaternion.from_matrix(q.to_matrix())
            assert quat_close(q, back, 1e-9)

    def test_from_matrix_rejects_bad_input(self):
        with pytest.raises(ValueError):
            UnitQuaternion.from_matrix(2.0 * np.eye(3))
        with pytest.raises(ValueError):
            UnitQuaternion.from_matrix(np.diag([1.0, 1.0, -1.0]))
        with pytest.raises(ValueError):
            UnitQuaternion.from_matrix(np.eye(4))

    def test_angle_and_angle_to(self):
        q = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 0.8)
        assert abs(q.angle() - 0.8) < 1e-12
        r = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 1.1)
        assert abs(q.angle_to(r) - 0.3) < 1e-12
        assert q.angle_to(q) == 0.0

    def test_unit_norm_stable_over_long_chain(self):
        rng = np.random.default_rng(13)
        q = UnitQuaternion.identity()
        for _ in range(10_000):
            q = q.multiply(random_quaternion(rng))
        assert abs(q.norm() - 1.0) <= 1e-9
        assert q.w >= 0.0


class TestVec3:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Vec3(0.0, float("inf"), 0.0)

    def test_normalized_zero_raises(self):
        with pytest.raises(ValueError):
            Vec3(0.0, 0.0, 0.0).normalized()

    def test_cross_and_dot(self):
        assert Vec3(1.0, 0.0, 0.0).cross(Vec3(0.0, 1.0, 0.0)) == Vec3(0.0, 0.0, 1.0)
        assert Vec3(1.0, 2.0, 3.0).dot(Vec3(4.0, 5.0, 6.0)) == 32.0


class TestCompose:
    def test_quarter_turn_then_translation(self):
        a = Pose(ROT90Z, Vec3(1.0, 0.0, 0.0))
        b = Pose(UnitQuaternion.identity(), Vec3(1.0, 0.0, 0.0))
        c = compose(a, b)
        assert abs(c.translation.x - 1.0) < 1e-15
        assert abs(c.translation.y - 1.0) < 1e-15
        assert abs(c.translation.z) < 1e-15
        assert quat_close(c.rotation, ROT90Z, 1e-15)

    def test_identity_is_neutral(self):
        p = Pose(ROT90Z, Vec3(0.3, -0.2, 0.7))
        for q in (compose(Pose.identity(), p), compose(p, Pose.identity())):
            assert quat_close(q.rotation, p.rotation, 1e-15)
            assert (q.translation - p.translation).norm() < 1e-15

    def test_matches_matrix_product(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            a, b = random_pose(rng), random_pose(rng)
            got = compose(a, b).to_matrix()
            want = a.to_matrix() @ b.to_matrix()
            assert np.max(np.abs(got - want)) < 1e-9

    def test_associative(self):
        rng = np.random.default_rng(22)
        for _ in range(200):
            a, b, c = (random_pose(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert (left.translation - right.translation).norm() < 1e-9
            assert quat_close(left.rotation, right.rotation, 1e-9)

    def test_frame_tags_chain(self):
        a = Pose(ROT90Z, Vec3(1.0, 0.0, 0.0), (FrameTag.BASE, FrameTag.CAMERA))
        b = Pose(UnitQuaternion.identity(), Vec3(0.0, 1.0, 0.0), (FrameTag.CAMERA, FrameTag.HAND))
        assert compose(a, b).frames == (FrameTag.BASE, FrameTag.HAND)

    def test_frame_tag_mismatch_raises(self):
        a = Pose(ROT90Z, Vec3(1.0, 0.0, 0.0), (FrameTag.BASE, FrameTag.CAMERA))
        b = Pose(UnitQuaternion.identity(), Vec3(0.0, 1.0, 0.0), (FrameTag.HAND, FrameTag.GRASP))
        with pytest.raises(FrameMismatchError):
            compose(a, b)

    def test_untagged_operand_disables_check(self):
        a = Pose(ROT90Z, Vec3(1.0, 0.0, 0.0), (FrameTag.BASE, FrameTag.CAMERA))
        b = Pose(UnitQuaternion.identity(), Vec3(0.0, 1.0, 0.0))
        assert compose(a, b).frames is None


class TestInvert:
    def test_pure_translation(self):
        p = Pose(UnitQuaternion.identity(), Vec3(0.1, -0.2, 0.3))
        inv = invert(p)
        assert (inv.translation + p.translation).norm() < 1e-15
        assert quat_close(inv.rotation, UnitQuaternion.identity(), 0.0)

    def test_round_trip_is_identity(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            p = random_pose(rng)
            e = compose(p, invert(p))
            assert e.translation.norm() < 1e-9
            assert e.rotation.angle() < 1e-9

    def test_involution(self):
        rng = np.random.default_rng(32)
        p = random_pose(rng)
        back = invert(invert(p))
        assert (back.translation - p.translation).norm() < 1e-12
        assert quat_close(back.rotation, p.rotation, 1e-12)

    def test_swaps_frame_tags(self):
        p = Pose(ROT90Z, Vec3(1.0, 0.0, 0.0), (FrameTag.BASE, FrameTag.CAMERA))
        assert invert(p).frames == (FrameTag.CAMERA, FrameTag.BASE)


class TestPoseMatrix:
    def test_round_trip(self):
        rng = np.random.default_rng(41)
        p = random_pose(rng)
        back = Pose.from_matrix(p.to_matrix())
        assert (back.translation - p.translation).norm() < 1e-12
        assert quat_close(back.rotation, p.rotation, 1e-9)

    def test_rejects_bad_last_row(self):
        m = np.eye(4)
        m[3, 0] = 0.1
        with pytest.raises(ValueError):
            Pose.from_matrix(m)


class TestHandInBase:
    def test_identity_calibration_passthrough(self):
        hand = Pose(ROT90Z, Vec3(0.1, 0.2, 0.9))
        out = hand_in_base(Pose.identity(), hand)
        assert (out.translation - hand.translation).norm() < 1e-15
        assert quat_close(out.rotation, hand.rotation, 1e-15)
        assert out.frames == (FrameTag.BASE, FrameTag.HAND)

    def test_overhead_camera_mapping(self):
        # Camera looking straight down from (0.5, 0, 1.4): base = (0.5+x, -y, 1.4-z).
        calib = Pose(UnitQuaternion(0.0, 1.0, 0.0, 0.0), Vec3(0.5, 0.0, 1.4))
        hand = Pose(UnitQuaternion.identity(), Vec3(-0.05, -0.10, 0.95))
        out = hand_in_base(calib, hand)
        assert abs(out.translation.x - 0.45) < 1e-15
        assert abs(out.translation.y - 0.10) < 1e-15
        assert abs(out.translation.z - 0.45) < 1e-15

    def test_yaw_offset_matches_matrix_oracle(self):
        calib = Pose(ROT90Z, Vec3(0.2, -0.1, 1.0))
        hand = Pose(UnitQuaternion.from_axis_angle(Vec3(1.0, 0.0, 0.0), 0.4), Vec3(0.0, 0.0, 0.5))
        got = hand_in_base(calib, hand).to_matrix()
        want = calib.to_matrix() @ hand.to_matrix()
        assert np.max(np.abs(got - want)) < 1e-12

    def test_rejects_mistagged_inputs(self):
        good_calib = Pose(ROT90Z, Vec3(0.0, 0.0, 1.0), (FrameTag.BASE, FrameTag.CAMERA))
        good_hand = Pose(UnitQuaternion.identity(), Vec3(0.0, 0.0, 0.5), (FrameTag.CAMERA, FrameTag.HAND))
        hand_in_base(good_calib, good_hand)
        bad_calib = Pose(ROT90Z, Vec3(0.0, 0.0, 1.0), (FrameTag.CAMERA, FrameTag.HAND))
        with pytest.raises(FrameMismatchError):
            hand_in_base(bad_calib, good_hand)
        bad_hand = Pose(UnitQuaternion.identity(), Vec3(0.0, 0.0, 0.5), (FrameTag.BASE, FrameTag.HAND))
        with pytest.raises(FrameMismatchError):
            hand_in_base(good_calib, bad_hand)


class TestGraspTarget:
    def test_identity_offset_returns_hand_pose_bitwise(self):
        hand = Pose(
            UnitQuaternion(0.2, 0.4, 0.4, math.sqrt(1.0 - 0.2**2 - 2 * 0.4**2)),
            Vec3(0.37, -0.11, 0.52),
        )
        out = grasp_target(hand, Pose.identity())
        assert (out.translation.x, out.translation.y, out.translation.z) == (0.37, -0.11, 0.52)
        assert out.rotation.as_wxyz() == hand.rotation.as_wxyz()
        assert out.frames == (FrameTag.BASE, FrameTag.GRASP)

    def test_palm_axis_shift(self):
        # Palm facing down: a +z hand-frame offset moves the target downward in base.
        hand = Pose(UnitQuaternion(0.0, 1.0, 0.0, 0.0), Vec3(0.45, 0.10, 0.45))
        offset = Pose(UnitQuaternion.identity(), Vec3(0.0, 0.0, 0.05))
        out = grasp_target(hand, offset)
        assert abs(out.translation.x - 0.45) < 1e-15
        assert abs(out.translation.y - 0.10) < 1e-15
        assert abs(out.translation.z - 0.40) < 1e-15

    def test_orientation_composes(self):
        hand = Pose(ROT90Z, Vec3(0.4, 0.0, 0.5))
        flip = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.pi)
        out = grasp_target(hand, Pose(flip, Vec3.zero()))
        assert quat_close(out.rotation, ROT90Z.multiply(flip), 1e-15)

    def test_rejects_mistagged_offset(self):
        hand = Pose(ROT90Z, Vec3(0.4, 0.0, 0.5), (FrameTag.BASE, FrameTag.HAND))
        bad = Pose(UnitQuaternion.identity(), Vec3.zero(), (FrameTag.BASE, FrameTag.GRASP))
        with pytest.raises(FrameMismatchError):
            grasp_target(hand, bad)


class TestBackProject:
    K = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)

    def test_principal_point_maps_to_axis(self):
        p = back_project(320.0, 240.0, 0.6, self.K)
        assert (p.x, p.y, p.z) == (0.0, 0.0, 0.6)

    def test_one_focal_length_off_center(self):
        p = back_project(920.0, 240.0, 0.5, self.K)
        assert abs(p.x - 0.5) < 1e-15
        assert p.y == 0.0 and p.z == 0.5
        p = back_project(320.0, 840.0, 2.0, self.K)
        assert abs(p.y - 2.0) < 1e-15
        assert p.x == 0.0 and p.z == 2.0

    def test_reprojection_round_trip(self):
        rng = np.random.default_rng(51)
        for _ in range(200):
            u = float(rng.uniform(0.0, 640.0))
            v = float(rng.uniform(0.0, 480.0))
            d = float(rng.uniform(0.2, 3.0))
            p = back_project(u, v, d, self.K)
            u2 = self.K.cx + self.K.fx * p.x / p.z
            v2 = self.K.cy + self.K.fy * p.y / p.z
            assert abs(u2 - u) < 1e-6 and abs(v2 - v) < 1e-6

    def test_depth_must_be_positive(self):
        with pytest.raises(ValueError):
            back_project(320.0, 240.0, 0.0, self.K)
        with pytest.raises(ValueError):
            back_project(320.0, 240.0, -0.4, self.K)

    def test_intrinsics_validation(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=0.0, fy=600.0, cx=320.0, cy=240.0)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=600.0, fy=600.0, cx=float("nan"), cy=240.0)


class TestSlerp:
    def test_endpoints_return_inputs(self):
        rng = np.random.default_rng(61)
        qa, qb = random_quaternion(rng), random_quaternion(rng)
        assert slerp(qa, qb, 0.0) is qa
        assert slerp(qa, qb, 1.0) is qb

    def test_midpoint_of_quarter_turn(self):
        qb = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.pi / 2.0)
        mid = slerp(UnitQuaternion.identity(), qb, 0.5)
        assert abs(mid.w - math.cos(math.pi / 8.0)) < 1e-12
        assert abs(mid.z - math.sin(math.pi / 8.0)) < 1e-12
        assert abs(mid.x) < 1e-12 and abs(mid.y) < 1e-12

    def test_takes_shortest_arc(self):
        qa = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.radians(170.0))
        qb = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.radians(-170.0))
        mid = slerp(qa, qb, 0.5)
        half_turn = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.pi)
        assert mid.angle_to(half_turn) < 1e-9
        # total travelled angle stays at the 20 degree gap, not 340
        assert qa.angle_to(mid) < math.radians(11.0)

    def test_near_parallel_falls_back_to_lerp(self):
        qa = UnitQuaternion.identity()
        qb = UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 1e-8)
        mid = slerp(qa, qb, 0.5)
        assert abs(mid.norm() - 1.0) <= 1e-12
        assert mid.angle_to(UnitQuaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 5e-9)) < 1e-9

    def test_parameter_range_checked(self):
        qa = UnitQuaternion.identity()
        with pytest.raises(ValueError):
            slerp(qa, qa, -0.1)
        with pytest.raises(ValueError):
            slerp(qa, qa, 1.1)

    def test_interpolates_angle_linearly(self):
        qa = UnitQuaternion.identity()
        qb = UnitQuaternion.from_axis_angle(Vec3(1.0, 2.0, -1.0).normalized(), 1.2)
        for u in (0.25, 0.5, 0.75):
            q = slerp(qa, qb, u)
            assert abs(qa.angle_to(q) - u * 1.2) < 1e-12
