"""Reactive driving support baseline: pick the velocity closest to the
user's command subject to per-ray safety constraints derived from the scan.

Each ray inside the critical band contributes a half-plane in (vx, vy)
velocity space limiting the approach speed toward that obstacle point so
the collision boundary cannot be crossed within the time horizon. The
commanded velocity is the Euclidean projection of the scaled user input
onto the intersection of those half-planes and the speed disk; rotation is
a heading-proportional term that turns the platform toward the intent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CollisionCapsule, LidarScan, VelocityCommand, threshold_arrays
from .user import UserInput

DEFAULT_TAU = 2.0


@dataclass(frozen=True)
class SafetyConstraint:
    """Half-plane n . v <= offset with a unit normal toward the obstacle."""

    normal: tuple[float, float]
    offset: float


def build_constraints(
    scan: LidarScan, capsule: CollisionCapsule, tau: float = DEFAULT_TAU
) -> list[SafetyConstraint]:
    """One half-plane per ray inside the critical band: the velocity
    component toward the obstacle point may close at most the remaining
    margin above the collision boundary within the horizon ``tau``."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    d_col, d_crit = threshold_arrays(capsule, scan.spec)
    angles = scan.spec.body_angles()
    active = scan.ranges < d_crit
    constraints = []
    for i in np.nonzero(active)[0]:
        constraints.append(
            SafetyConstraint(
                normal=(math.cos(angles[i]), math.sin(angles[i])),
                offset=(float(scan.ranges[i]) - float(d_col[i])) / tau,
            )
        )
    return constraints


def project_velocity(
    target: np.ndarray, constraints: list[SafetyConstraint], v_max_lin: float
) -> tuple[np.ndarray, bool]:
    """Exact Euclidean projection of ``target`` onto the intersection of the
    speed disk and all half-planes. Returns (point, feasible).

    The 2D structure makes the projection combinatorial: the optimum is the
    target itself, the projection onto one active boundary, or a vertex
    where two boundaries intersect. All candidates are enumerated and the
    closest feasible one wins; no feasible candidate means the safe set is
    empty.
    """
    t = np.asarray(target, dtype=np.float64)
    normals = np.array([c.normal for c in constraints], dtype=np.float64).reshape(-1, 2)
    offsets = np.array([c.offset for c in constraints], dtype=np.float64)
    k = len(constraints)
    tol = 1e-9

    chunks = [t.reshape(1, 2)]
    if k:
        # projection onto each half-plane boundary line
        chunks.append(t[None, :] - (normals @ t - offsets)[:, None] * normals)
    # projection onto the disk boundary
    speed = float(np.hypot(t[0], t[1]))
    if speed > 1e-15:
        chunks.append((t * (v_max_lin / speed)).reshape(1, 2))
    if k >= 2:
        # line-line vertices
        ii, jj = np.triu_indices(k, 1)
        det = normals[ii, 0] * normals[jj, 1] - normals[ii, 1] * normals[jj, 0]
        ok = np.abs(det) > 1e-12
        ii, jj, det = ii[ok], jj[ok], det[ok]
        px = (offsets[ii] * normals[jj, 1] - offsets[jj] * normals[ii, 1]) / det
        py = (normals[ii, 0] * offsets[jj] - normals[jj, 0] * offsets[ii]) / det
        chunks.append(np.stack([px, py], axis=1))
    if k:
        # line-circle vertices
        rad2 = v_max_lin**2 - offsets**2
        ok = rad2 >= 0.0
        s = np.sqrt(rad2[ok])[:, None]
        base = offsets[ok, None] * normals[ok]
        perp = np.stack([-normals[ok, 1], normals[ok, 0]], axis=1)
        chunks.append(base + s * perp)
        chunks.append(base - s * perp)

    candidates = np.concatenate(chunks, axis=0)
    feasible = np.einsum("ij,ij->i", candidates, candidates) <= v_max_lin**2 + tol
    if k:
        feasible &= np.all(candidates @ normals.T <= offsets[None, :] + tol, axis=1)
    if not feasible.any():
        return np.zeros(2), False
    diffs = candidates[feasible] - t[None, :]
    costs = np.einsum("ij,ij->i", diffs, diffs)
    return candidates[feasible][int(np.argmin(costs))], True


def solve_rds(
    u: UserInput,
    constraints: list[SafetyConstraint],
    v_max_lin: float,
    omega_max: float,
    heading_gain: float = 1.0,
) -> VelocityCommand:
    """Velocity command closest to the scaled user input within the safe
    set; an infeasible (fully surrounded) set commands zero linear motion.
    """
    target = np.array([u.ux, u.uy], dtype=np.float64) * v_max_lin
    v, feasible = project_velocity(target, constraints, v_max_lin)
    if not feasible:
        v = np.zeros(2)
    if u.norm > 1e-12:
        omega = heading_gain * math.atan2(u.uy, u.ux)
        omega = max(-omega_max, min(omega_max, omega))
    else:
        omega = 0.0
    return VelocityCommand(vx=float(v[0]), vy=float(v[1]), omega=omega)
