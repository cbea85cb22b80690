import math

import numpy as np
import pytest

from holoshare.geometry import (
    AxisBox,
    Circle,
    CollisionCapsule,
    LidarSpec,
    Pose2D,
    Segment,
    Vec2,
    VelocityCommand,
    WorldSpec,
    Zone,
    capsule_threshold,
    classify_proximity,
    integrate_kinematics,
    LidarScan,
    point_clearance,
    raycast,
    threshold_arrays,
    world_from_dict,
    world_to_dict,
    wrap_angle,
)
from oracles import march_raycast, monte_carlo_capsule_boundary, random_world

CAPSULE = CollisionCapsule()  # 0.65 m / 1.05 m diameters, 0.3 m segment
LIDAR36 = LidarSpec(n_rays=36)


class TestRaycast:
    def test_single_circle_dead_ahead(self):
        world = WorldSpec(10.0, [Circle(Vec2(2.0, 0.0), 0.5)])
        scan = raycast(world, Pose2D(Vec2(0, 0), 0.0), LIDAR36)
        assert scan.ranges[0] == pytest.approx(1.5, abs=1e-12)

    def test_empty_world_clamps_to_max_range(self):
        world = WorldSpec(10.0, [])
        scan = raycast(world, Pose2D(Vec2(0, 0), 0.0), LIDAR36)
        assert np.all(scan.ranges == LIDAR36.max_range)

    def test_rotated_pose_sees_rotated_circle(self):
        world = WorldSpec(10.0, [Circle(Vec2(0.0, 2.0), 0.5)])
        scan = raycast(world, Pose2D(Vec2(0, 0), math.pi / 2), LIDAR36)
        assert scan.ranges[0] == pytest.approx(1.5, abs=1e-12)

    def test_wall_distance(self):
        world = WorldSpec(2.0, [])
        spec = LidarSpec(n_rays=36, max_range=2.5)
        scan = raycast(world, Pose2D(Vec2(0.5, 0.0), 0.0), spec)
        assert scan.ranges[0] == pytest.approx(1.5)
        assert scan.ranges[18] == pytest.approx(2.5)  # clamped at max range

    def test_box_hit(self):
        world = WorldSpec(10.0, [AxisBox(Vec2(2.0, 0.0), Vec2(0.5, 1.0))])
        scan = raycast(world, Pose2D(Vec2(0, 0), 0.0), LIDAR36)
        assert scan.ranges[0] == pytest.approx(1.5, abs=1e-12)

    def test_thick_segment_hit(self):
        world = WorldSpec(10.0, [Segment(Vec2(2.0, -1.0), Vec2(2.0, 1.0), thickness=0.2)])
        scan = raycast(world, Pose2D(Vec2(0, 0), 0.0), LIDAR36)
        assert scan.ranges[0] == pytest.approx(1.9, abs=1e-12)

    def test_thin_segment_hit(self):
        world = WorldSpec(10.0, [Segment(Vec2(1.2, -1.0), Vec2(1.2, 1.0), thickness=0.0)])
        scan = raycast(world, Pose2D(Vec2(0, 0), 0.0), LIDAR36)
        assert scan.ranges[0] == pytest.approx(1.2, abs=1e-12)

    def test_matches_marching_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            world, pose = random_world(rng)
            spec = LidarSpec(n_rays=360)
            scan = raycast(world, pose, spec)
            expected = march_raycast(world, pose, spec)
            np.testing.assert_allclose(scan.ranges, expected, atol=1e-3)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            alpha = float(rng.uniform(-math.pi, math.pi))
            ca, sa = math.cos(alpha), math.sin(alpha)

            def rot(v: Vec2) -> Vec2:
                return Vec2(ca * v.x - sa * v.y, sa * v.x + ca * v.y)

            obstacles = [
                Circle(Vec2(1.5, 0.3), 0.4),
                Segment(Vec2(-1.0, 1.0), Vec2(0.5, 1.8), thickness=0.1),
            ]
            pose = Pose2D(Vec2(0.2, -0.3), float(rng.uniform(-math.pi, math.pi)))
            world = WorldSpec(5.0, obstacles)
            rotated = WorldSpec(
                5.0,
                [
                    Circle(rot(obstacles[0].center), obstacles[0].radius),
                    Segment(rot(obstacles[1].a), rot(obstacles[1].b), obstacles[1].thickness),
                ],
            )
            rotated_pose = Pose2D(rot(pose.position), pose.yaw + alpha)
            spec = LidarSpec(n_rays=36)  # walls out of range: |pos| small, arena 5 m
            np.testing.assert_allclose(
                raycast(world, pose, spec).ranges,
                raycast(rotated, rotated_pose, spec).ranges,
                atol=1e-9,
            )


class TestCapsuleThreshold:
    def test_forward_threshold(self):
        d_col, d_crit = capsule_threshold(CAPSULE, 0.0)
        assert d_col == pytest.approx(0.475, abs=1e-12)
        assert d_crit == pytest.approx(0.675, abs=1e-12)

    def test_lateral_threshold(self):
        d_col, _ = capsule_threshold(CAPSULE, math.pi / 2)
        assert d_col == pytest.approx(0.325, abs=1e-12)

    def test_crit_exceeds_col_everywhere(self):
        for angle in np.linspace(-math.pi, math.pi, 721):
            d_col, d_crit = capsule_threshold(CAPSULE, float(angle))
            assert d_crit > d_col

    def test_symmetry(self):
        for angle in np.linspace(0, math.pi, 181):
            d_pos, _ = capsule_threshold(CAPSULE, float(angle))
            d_neg, _ = capsule_threshold(CAPSULE, -float(angle))
            assert d_pos == pytest.approx(d_neg, abs=1e-12)

    def test_matches_monte_carlo_oracle(self):
        rng = np.random.default_rng(3)
        angles = rng.uniform(-math.pi, math.pi, size=1000)
        for angle in angles:
            d_col, d_crit = capsule_threshold(CAPSULE, float(angle))
            mc_col = monte_carlo_capsule_boundary(
                CAPSULE.radius_col, CAPSULE.segment_half_length, float(angle)
            )
            mc_crit = monte_carlo_capsule_boundary(
                CAPSULE.radius_crit, CAPSULE.segment_half_length, float(angle)
            )
            assert d_col == pytest.approx(mc_col, abs=1e-3)
            assert d_crit == pytest.approx(mc_crit, abs=1e-3)


class TestClassifyProximity:
    def _scan(self, ranges):
        return LidarScan(ranges=np.asarray(ranges, dtype=np.float64), spec=LIDAR36)

    def test_lateral_collision(self):
        ranges = np.full(36, 2.5)
        ranges[9] = 0.30  # ray 9 = 90 deg, d_col = 0.325
        zones = classify_proximity(self._scan(ranges), CAPSULE)
        assert zones[9] == Zone.COLLISION

    def test_lateral_critical(self):
        ranges = np.full(36, 2.5)
        ranges[9] = 0.40
        zones = classify_proximity(self._scan(ranges), CAPSULE)
        assert zones[9] == Zone.CRITICAL

    def test_max_range_is_free(self):
        zones = classify_proximity(self._scan(np.full(36, 2.5)), CAPSULE)
        assert np.all(zones == Zone.FREE)

    def test_threshold_arrays_shapes(self):
        d_col, d_crit = threshold_arrays(CAPSULE, LIDAR36)
        assert d_col.shape == (36,)
        assert np.all(d_crit > d_col)


class TestKinematics:
    def test_forward_step(self):
        pose = integrate_kinematics(Pose2D(Vec2(0, 0), 0.0), VelocityCommand(1, 0, 0), 0.025)
        assert pose.position.x == pytest.approx(0.025)
        assert pose.position.y == pytest.approx(0.0)

    def test_rotated_frame(self):
        pose = integrate_kinematics(
            Pose2D(Vec2(0, 0), math.pi / 2), VelocityCommand(1, 0, 0), 0.025
        )
        assert pose.position.x == pytest.approx(0.0, abs=1e-15)
        assert pose.position.y == pytest.approx(0.025)
        assert pose.yaw == pytest.approx(math.pi / 2)

    def test_zero_command_fixed_point(self):
        start = Pose2D(Vec2(1.2, -0.7), 0.4)
        pose = start
        for _ in range(50):
            pose = integrate_kinematics(pose, VelocityCommand(0, 0, 0), 0.025)
        assert pose == start

    def test_straight_line_without_rotation(self):
        pose = Pose2D(Vec2(0, 0), 0.7)
        cmd = VelocityCommand(0.8, -0.2, 0.0)
        pts = []
        for _ in range(40):
            pose = integrate_kinematics(pose, cmd, 0.025)
            pts.append((pose.position.x, pose.position.y))
        pts = np.array(pts)
        # collinearity: cross product of consecutive displacement vectors ~ 0
        d = np.diff(pts, axis=0)
        cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
        np.testing.assert_allclose(cross, 0.0, atol=1e-15)

    def test_yaw_wraps(self):
        pose = integrate_kinematics(Pose2D(Vec2(0, 0), 3.1), VelocityCommand(0, 0, 4.0), 0.025)
        assert -math.pi < pose.yaw <= math.pi

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            integrate_kinematics(Pose2D(Vec2(0, 0), 0.0), VelocityCommand(0, 0, 0), 0.0)


class TestWrapAngle:
    @pytest.mark.parametrize(
        "raw,expected",
        [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi, math.pi), (7.0, 7.0 - 2 * math.pi)],
    )
    def test_values(self, raw, expected):
        assert wrap_angle(raw) == pytest.approx(expected, abs=1e-12)


class TestWorldSerialization:
    def test_round_trip(self):
        world = WorldSpec(
            5.0,
            [
                Circle(Vec2(1.0, 2.0), 0.4),
                AxisBox(Vec2(-1.0, 0.0), Vec2(0.5, 1.5)),
                Segment(Vec2(0.0, -2.0), Vec2(1.0, -2.0), thickness=0.2),
            ],
        )
        again = world_from_dict(world_to_dict(world))
        assert again.arena_half_extent == world.arena_half_extent
        assert again.obstacles == world.obstacles

    def test_rejects_unknown_type(self):
        with pytest.raises(ValueError):
            world_from_dict({"arena_half_extent": 5.0, "obstacles": [{"type": "pyramid"}]})

    def test_rejects_obstacle_outside_arena(self):
        with pytest.raises(ValueError):
            WorldSpec(2.0, [Circle(Vec2(2.0, 0.0), 0.5)])


class TestPointClearance:
    def test_clearance_next_to_circle(self):
        world = WorldSpec(5.0, [Circle(Vec2(2.0, 0.0), 0.5)])
        assert point_clearance(world, Vec2(0.0, 0.0)) == pytest.approx(1.5)

    def test_clearance_negative_inside(self):
        world = WorldSpec(5.0, [AxisBox(Vec2(0.0, 0.0), Vec2(1.0, 1.0))])
        assert point_clearance(world, Vec2(0.0, 0.0)) < 0

    def test_wall_clearance(self):
        world = WorldSpec(5.0, [])
        assert point_clearance(world, Vec2(4.0, 0.0)) == pytest.approx(1.0)
