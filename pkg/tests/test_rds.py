import math

import numpy as np
import pytest

from holoshare.envs import DoneReason, EnvConfig, EnvKind, reset_episode, step_episode
from holoshare.geometry import (
    CollisionCapsule,
    LidarScan,
    LidarSpec,
    Zone,
    capsule_threshold,
    classify_proximity,
    raycast,
)
from holoshare.rds import (
    SafetyConstraint,
    build_constraints,
    project_velocity,
    solve_rds,
)
from holoshare.reward import REWARD_PROFILES
from holoshare.user import UserInput

CAPSULE = CollisionCapsule()
LIDAR36 = LidarSpec(n_rays=36)


def grid_projection_oracle(target, constraints, v_max, n=201):
    """Brute force: densest feasible grid point closest to the target."""
    axis = np.linspace(-v_max, v_max, n)
    vx, vy = np.meshgrid(axis, axis, indexing="ij")
    feasible = vx**2 + vy**2 <= v_max**2
    for c in constraints:
        feasible &= c.normal[0] * vx + c.normal[1] * vy <= c.offset + 1e-12
    if not feasible.any():
        return None
    cost = (vx - target[0]) ** 2 + (vy - target[1]) ** 2
    cost[~feasible] = np.inf
    i, j = np.unravel_index(np.argmin(cost), cost.shape)
    return np.array([axis[i], axis[j]])


class TestBuildConstraints:
    def test_all_free_is_empty(self):
        scan = LidarScan(ranges=np.full(36, 2.5), spec=LIDAR36)
        assert build_constraints(scan, CAPSULE) == []

    def test_single_forward_obstacle(self):
        ranges = np.full(36, 2.5)
        ranges[0] = 0.575
        scan = LidarScan(ranges=ranges, spec=LIDAR36)
        constraints = build_constraints(scan, CAPSULE, tau=1.0)
        assert len(constraints) == 1
        c = constraints[0]
        assert c.normal == pytest.approx((1.0, 0.0))
        assert c.offset == pytest.approx((0.575 - 0.475) / 1.0)

    def test_zero_margin_at_collision_boundary(self):
        d_col, _ = capsule_threshold(CAPSULE, 0.0)
        ranges = np.full(36, 2.5)
        ranges[0] = d_col
        scan = LidarScan(ranges=ranges, spec=LIDAR36)
        (c,) = build_constraints(scan, CAPSULE, tau=2.0)
        assert c.offset == pytest.approx(0.0, abs=1e-12)

    def test_rejects_bad_tau(self):
        scan = LidarScan(ranges=np.full(36, 2.5), spec=LIDAR36)
        with pytest.raises(ValueError):
            build_constraints(scan, CAPSULE, tau=0.0)


class TestSolveRds:
    def test_identity_without_constraints(self):
        cmd = solve_rds(UserInput(1.0, 0.0), [], v_max_lin=1.0, omega_max=1.0)
        assert cmd.vx == pytest.approx(1.0)
        assert cmd.vy == pytest.approx(0.0)
        assert cmd.omega == pytest.approx(0.0)

    def test_projection_onto_single_halfplane(self):
        constraints = [SafetyConstraint(normal=(1.0, 0.0), offset=0.1)]
        cmd = solve_rds(UserInput(1.0, 0.0), constraints, v_max_lin=1.0, omega_max=1.0)
        assert cmd.vx == pytest.approx(0.1, abs=1e-9)
        assert cmd.vy == pytest.approx(0.0, abs=1e-9)

    def test_heading_proportional_omega(self):
        cmd = solve_rds(UserInput(0.6, 0.8), [], v_max_lin=1.0, omega_max=2.0, heading_gain=1.0)
        assert cmd.omega == pytest.approx(math.atan2(0.8, 0.6), abs=1e-12)
        assert cmd.omega == pytest.approx(0.9273, abs=1e-4)

    def test_omega_clamped(self):
        cmd = solve_rds(UserInput(-1.0, 0.01), [], v_max_lin=1.0, omega_max=1.0)
        assert cmd.omega == pytest.approx(1.0)

    def test_idle_input_stays_put(self):
        cmd = solve_rds(UserInput(0.0, 0.0), [], v_max_lin=1.0, omega_max=1.0)
        assert (cmd.vx, cmd.vy, cmd.omega) == (0.0, 0.0, 0.0)

    def test_infeasible_set_zeroes_linear(self):
        constraints = [
            SafetyConstraint(normal=(1.0, 0.0), offset=-2.0),
            SafetyConstraint(normal=(-1.0, 0.0), offset=-2.0),
        ]
        cmd = solve_rds(UserInput(1.0, 0.0), constraints, v_max_lin=1.0, omega_max=1.0)
        assert (cmd.vx, cmd.vy) == (0.0, 0.0)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(0)
        v_max = 1.0
        cell = 2 * v_max / 200
        checked = 0
        for _ in range(500):
            n_constraints = int(rng.integers(0, 6))
            constraints = []
            for _ in range(n_constraints):
                theta = rng.uniform(-math.pi, math.pi)
                constraints.append(
                    SafetyConstraint(
                        normal=(math.cos(theta), math.sin(theta)),
                        offset=float(rng.uniform(-0.2, 1.0)),
                    )
                )
            ux, uy = rng.uniform(-1, 1, 2)
            norm = math.hypot(ux, uy)
            if norm > 1:
                ux, uy = ux / norm, uy / norm
            target = np.array([ux, uy]) * v_max
            oracle = grid_projection_oracle(target, constraints, v_max)
            v, feasible = project_velocity(target, constraints, v_max)
            if oracle is None:
                # empty grid: accept either infeasibility or a boundary point
                continue
            assert feasible
            checked += 1
            # optimality: no feasible grid point is closer to the target
            # than our projection, up to one grid cell of slack
            assert np.linalg.norm(v - target) <= np.linalg.norm(oracle - target) + cell
            # satisfies every constraint to tolerance
            for c in constraints:
                assert c.normal[0] * v[0] + c.normal[1] * v[1] <= c.offset + 1e-6
            assert np.hypot(v[0], v[1]) <= v_max + 1e-6
        assert checked > 400  # the vast majority of random sets are feasible


class TestSafetyProperty:
    @pytest.mark.parametrize("kind", [EnvKind.CYLINDER, EnvKind.BOX, EnvKind.DOOR])
    def test_never_enters_collision_zone(self, kind):
        config = EnvConfig(
            kind,
            lidar=LidarSpec(n_rays=360),
            v_max_lin=0.67,
            omega_max=2.0,
            max_steps=400,
        )
        weights = REWARD_PROFILES["R1"]
        rng = np.random.default_rng(hash(kind.value) % 2**32)
        for episode in range(3):
            state = reset_episode(config, rng)
            scan = raycast(state.world, state.pose, config.lidar)
            assert np.all(classify_proximity(scan, config.capsule) == Zone.FREE)
            for _ in range(config.max_steps):
                from holoshare.user import simulated_input

                u = simulated_input(state.pose, state.target)
                constraints = build_constraints(scan, config.capsule)
                cmd = solve_rds(u, constraints, config.v_max_lin, config.omega_max)
                action = np.array(
                    [cmd.vx / config.v_max_lin, cmd.vy / config.v_max_lin,
                     cmd.omega / config.omega_max]
                )
                state, result = step_episode(state, action, config, weights)
                scan = result.scan
                assert not np.any(result.zones == Zone.COLLISION), (
                    f"collision in {kind} episode {episode}"
                )
                if result.done:
                    assert result.done_reason is not DoneReason.COLLISION
                    break
