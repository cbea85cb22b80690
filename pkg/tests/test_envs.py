import math

import numpy as np
import pytest

from holoshare.envs import (
    CURRICULUM_STAGE1_EPOCHS,
    DoneReason,
    EnvBatch,
    EnvConfig,
    EnvKind,
    ResetError,
    SharedControlEnv,
    assign_env_kinds,
    curriculum_schedule,
    make_env_batch,
    observe,
    parse_env_set,
    reset_episode,
    step_episode,
    build_world,
)
from holoshare.geometry import AxisBox, Vec2, Zone, classify_proximity, point_clearance, raycast
from holoshare.reward import REWARD_PROFILES

R1 = REWARD_PROFILES["R1"]
FC_LFC = REWARD_PROFILES["FC_LFC"]


class MidpointRng:
    """Stub generator whose uniform() always lands mid-interval."""

    def __init__(self, quantile=0.5):
        self.q = quantile

    def uniform(self, low=0.0, high=1.0, size=None):
        value = low + self.q * (high - low)
        if size is None:
            return value
        return np.full(size, value)


class TestWorldBuilding:
    def test_empty_has_no_obstacles(self):
        world = build_world(EnvKind.EMPTY, EnvConfig(EnvKind.EMPTY), np.random.default_rng(0))
        assert world.obstacles == []

    def test_cylinder_layout(self):
        world = build_world(
            EnvKind.CYLINDER, EnvConfig(EnvKind.CYLINDER), np.random.default_rng(0)
        )
        assert len(world.obstacles) == 4
        centers = {(ob.center.x, ob.center.y) for ob in world.obstacles}
        assert (1.5, 1.0) in centers and (-2.0, 1.8) in centers

    def test_box_midpoint_draws(self):
        world = build_world(EnvKind.BOX, EnvConfig(EnvKind.BOX), MidpointRng(0.5))
        box = world.obstacles[0]
        assert isinstance(box, AxisBox)
        assert 2 * box.half_extents.y == pytest.approx(2.5)  # l = 2.5 m
        assert 2 * box.half_extents.x == pytest.approx(1.5)  # b = 1.5 m

    def test_door_lower_bound_draw(self):
        world = build_world(EnvKind.DOOR, EnvConfig(EnvKind.DOOR), MidpointRng(0.0))
        top, bottom = world.obstacles
        gap = (top.center.y - top.half_extents.y) - (bottom.center.y + bottom.half_extents.y)
        assert gap == pytest.approx(0.9)

    def test_door_upper_bound_draw(self):
        world = build_world(EnvKind.DOOR, EnvConfig(EnvKind.DOOR), MidpointRng(1.0))
        top, bottom = world.obstacles
        gap = (top.center.y - top.half_extents.y) - (bottom.center.y + bottom.half_extents.y)
        assert gap == pytest.approx(1.75)

    def test_custom_randomization_ranges(self):
        config = EnvConfig(
            EnvKind.BOX, box_length_range=(2.0, 2.0), box_breadth_range=(1.5, 1.5)
        )
        world = build_world(EnvKind.BOX, config, np.random.default_rng(0))
        box = world.obstacles[0]
        assert 2 * box.half_extents.y == pytest.approx(2.0)
        assert 2 * box.half_extents.x == pytest.approx(1.5)

    def test_invalid_ranges_rejected(self):
        with pytest.raises(ValueError):
            EnvConfig(EnvKind.DOOR, door_width_range=(1.5, 0.9))


class TestReset:
    @pytest.mark.parametrize("kind", list(EnvKind))
    def test_spawns_clear_of_critical_zone(self, kind):
        config = EnvConfig(kind)
        rng = np.random.default_rng(123)
        for _ in range(40):
            state = reset_episode(config, rng)
            reach = config.capsule.max_reach
            assert point_clearance(state.world, state.pose.position) >= reach
            assert point_clearance(state.world, state.target) >= reach
            scan = raycast(state.world, state.pose, config.lidar)
            zones = classify_proximity(scan, config.capsule)
            assert np.all(zones == Zone.FREE)

    def test_determinism(self):
        config = EnvConfig(EnvKind.BOX)
        a = reset_episode(config, np.random.default_rng(9))
        b = reset_episode(config, np.random.default_rng(9))
        assert a.pose == b.pose
        assert a.target == b.target
        assert a.world.obstacles == b.world.obstacles

    def test_box_blocks_line_of_sight(self):
        config = EnvConfig(EnvKind.BOX)
        rng = np.random.default_rng(5)
        for _ in range(50):
            state = reset_episode(config, rng)
            box = state.world.obstacles[0]
            s, t = state.pose.position, state.target
            # both endpoints beyond the box faces, the crossing stays inside
            # the lateral extent, so the segment must cross the box slab
            assert s.x * t.x < 0
            frac = abs(s.x) / (abs(s.x) + abs(t.x))
            y_at_plane = s.y + frac * (t.y - s.y)
            assert abs(y_at_plane) <= box.half_extents.y + 1e-9

    def test_door_sides_oppose(self):
        config = EnvConfig(EnvKind.DOOR)
        rng = np.random.default_rng(6)
        for _ in range(50):
            state = reset_episode(config, rng)
            assert state.pose.position.x * state.target.x < 0
            assert state.pose.position.y * state.target.y <= 0  # opposing quadrant

    def test_action_history_zeroed(self):
        state = reset_episode(EnvConfig(EnvKind.EMPTY), np.random.default_rng(0))
        assert np.all(state.last_action == 0)
        assert np.all(state.second_last_action == 0)
        assert state.step_count == 0

    def test_impossible_clearance_raises(self):
        config = EnvConfig(
            EnvKind.EMPTY,
            capsule=__import__("holoshare.geometry", fromlist=["CollisionCapsule"])
            .CollisionCapsule(radius_col=3.0, radius_crit=6.0, segment_half_length=0.0),
        )
        with pytest.raises(ResetError):
            reset_episode(config, np.random.default_rng(0))


class TestStep:
    def test_action_history_shifts(self):
        config = EnvConfig(EnvKind.EMPTY)
        state = reset_episode(config, np.random.default_rng(1))
        a1 = np.array([0.5, 0.1, -0.2])
        a2 = np.array([-0.3, 0.2, 0.4])
        state, _ = step_episode(state, a1, config, R1)
        np.testing.assert_array_equal(state.last_action, a1)
        assert np.all(state.second_last_action == 0)
        state, _ = step_episode(state, a2, config, R1)
        np.testing.assert_array_equal(state.last_action, a2)
        np.testing.assert_array_equal(state.second_last_action, a1)

    def test_goal_reached(self):
        config = EnvConfig(EnvKind.EMPTY)
        state = reset_episode(config, np.random.default_rng(2))
        # park the robot right next to the target, then drive onto it
        from holoshare.geometry import Pose2D

        state.pose = Pose2D(Vec2(state.target.x - 0.31, state.target.y), 0.0)
        for _ in range(10):
            state, result = step_episode(state, np.array([1.0, 0.0, 0.0]), config, R1)
            if result.done:
                break
        assert result.done_reason is DoneReason.GOAL_REACHED

    def test_collision_terminates_with_penalty(self):
        from holoshare.geometry import Pose2D

        config = EnvConfig(EnvKind.CYLINDER, lidar=EnvConfig(EnvKind.EMPTY).lidar)
        state = reset_episode(config, np.random.default_rng(3))
        # place just outside the collision boundary of the first cylinder
        # and drive straight at it
        state.pose = Pose2D(Vec2(1.5 - CYL_GAP, 1.0), 0.0)
        result = None
        for _ in range(60):
            state, result = step_episode(state, np.array([1.0, 0.0, 0.0]), config, R1)
            if result.done:
                break
        assert result is not None and result.done_reason is DoneReason.COLLISION
        assert result.reward.obstacles <= R1.r_col

    def test_timeout_with_zero_action(self):
        config = EnvConfig(EnvKind.EMPTY, max_steps=25)
        state = reset_episode(config, np.random.default_rng(4))
        for i in range(25):
            state, result = step_episode(state, np.zeros(3), config, R1)
        assert result.done_reason is DoneReason.TIMEOUT
        assert result.done

    def test_observation_matches_observe(self):
        config = EnvConfig(EnvKind.EMPTY)
        state = reset_episode(config, np.random.default_rng(5))
        state, result = step_episode(state, np.array([0.2, 0.0, 0.1]), config, R1)
        vec, _, _ = observe(state, config)
        np.testing.assert_allclose(result.observation, vec, atol=1e-7)


CYL_GAP = 0.4 + 0.475 + 0.3  # cylinder radius + forward d_col + margin


class TestCurriculum:
    def test_stage1_is_empty_only(self):
        dist = curriculum_schedule(10, parse_env_set("abcd"))
        assert dist == {EnvKind.EMPTY: 1.0}

    def test_stage2_even_split(self):
        dist = curriculum_schedule(50, parse_env_set("abcd"))
        assert dist == {k: 0.25 for k in EnvKind}
        counts = assign_env_kinds(dist, 128)
        assert all(counts.count(k) == 32 for k in EnvKind)

    def test_stage2_three_envs(self):
        dist = curriculum_schedule(50, parse_env_set("a,b,c"))
        assert dist == {
            EnvKind.EMPTY: pytest.approx(1 / 3),
            EnvKind.CYLINDER: pytest.approx(1 / 3),
            EnvKind.BOX: pytest.approx(1 / 3),
        }
        counts = assign_env_kinds(dist, 128)
        assert sum(counts.count(k) for k in dist) == 128
        assert {counts.count(EnvKind.EMPTY), counts.count(EnvKind.CYLINDER),
                counts.count(EnvKind.BOX)} == {42, 43}

    def test_rejects_negative_epoch(self):
        with pytest.raises(ValueError):
            curriculum_schedule(-1, [EnvKind.EMPTY])

    def test_boundary_epoch(self):
        assert curriculum_schedule(CURRICULUM_STAGE1_EPOCHS - 1, parse_env_set("ab")) == {
            EnvKind.EMPTY: 1.0
        }
        assert EnvKind.CYLINDER in curriculum_schedule(CURRICULUM_STAGE1_EPOCHS, parse_env_set("ab"))


class TestParseEnvSet:
    def test_letters(self):
        assert parse_env_set("a,b,c") == [EnvKind.EMPTY, EnvKind.CYLINDER, EnvKind.BOX]

    def test_compact(self):
        assert parse_env_set("abcd") == list(EnvKind)

    def test_names(self):
        assert parse_env_set("empty,door") == [EnvKind.EMPTY, EnvKind.DOOR]

    def test_unknown(self):
        with pytest.raises(ValueError):
            parse_env_set("a,z")

    def test_dedupe_and_order(self):
        assert parse_env_set("d,a,d") == [EnvKind.EMPTY, EnvKind.DOOR]


class TestEnvBatch:
    def test_batch_shapes_and_autoreset(self):
        kinds = [EnvKind.EMPTY] * 4
        batch = make_env_batch(kinds, EnvConfig(EnvKind.EMPTY, max_steps=5), R1, seed=0)
        obs = batch.reset_all()
        assert obs.shape == (4, 47)
        for _ in range(5):
            obs, rewards, dones, info = batch.step(np.zeros((4, 3)))
        assert dones.all()  # timeout everywhere
        stats = batch.pop_stats()
        assert stats.ended == 4 and stats.timeouts == 4
        # fresh episodes are live after auto-reset
        for env in batch.envs:
            assert env.state.step_count == 0

    def test_seeded_determinism(self):
        def run():
            batch = make_env_batch([EnvKind.BOX] * 3, EnvConfig(EnvKind.BOX), R1, seed=11)
            obs = batch.reset_all()
            rng = np.random.default_rng(0)
            out = [obs]
            for _ in range(20):
                obs, r, d, _ = batch.step(rng.uniform(-1, 1, (3, 3)))
                out.append(obs)
            return np.concatenate([o.ravel() for o in out])

        np.testing.assert_array_equal(run(), run())

    def test_state_snapshot_round_trip(self):
        batch = make_env_batch([EnvKind.CYLINDER] * 2, EnvConfig(EnvKind.CYLINDER), R1, seed=3)
        batch.reset_all()
        rng = np.random.default_rng(1)
        for _ in range(7):
            batch.step(rng.uniform(-1, 1, (2, 3)))
        snap = batch.get_state()
        obs_a, r_a, d_a, _ = batch.step(np.full((2, 3), 0.1))

        batch2 = make_env_batch([EnvKind.CYLINDER] * 2, EnvConfig(EnvKind.CYLINDER), R1, seed=99)
        batch2.reset_all()
        batch2.set_state(snap)
        obs_b, r_b, d_b, _ = batch2.step(np.full((2, 3), 0.1))
        np.testing.assert_array_equal(obs_a, obs_b)
        np.testing.assert_array_equal(r_a, r_b)
