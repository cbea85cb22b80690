"""Figure rendering for evaluation reports: thin consumers of the metric
series and trajectory logs; all numbers live in the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def metric_boxplots(reports, path, metric: str = "heading") -> None:
    """One boxplot panel per scenario, one box per policy."""
    scenarios = sorted({r.scenario for r in reports})
    if not scenarios:
        return
    fig, axes = plt.subplots(
        1, len(scenarios), figsize=(2.4 * len(scenarios) + 1, 3.2), squeeze=False
    )
    unit = "rad" if metric == "heading" else "1/s^3-ish mixed units"
    for ax, scenario in zip(axes[0], scenarios):
        series, labels = [], []
        for r in reports:
            if r.scenario != scenario:
                continue
            values = getattr(r, metric)
            if values.size:
                series.append(values)
                labels.append(r.policy)
        if series:
            ax.boxplot(series, tick_labels=labels, showfliers=False)
        ax.set_title(scenario, fontsize=9)
        ax.tick_params(axis="x", rotation=45, labelsize=7)
    axes[0][0].set_ylabel(f"{metric} [{unit}]", fontsize=8)
    fig.suptitle(f"{metric} per scenario")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def trajectory_figure(log, path, world=None) -> None:
    """Top-down path with the obstacle layout reconstructed from the
    scenario name when no world is given."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if world is None:
        world = _world_from_meta(log.meta)
    if world is not None:
        _draw_world(ax, world)
    x, y = log.column("x"), log.column("y")
    ax.plot(x, y, color="tab:red", linewidth=1.4, label="trajectory")
    if len(x):
        ax.plot(x[0], y[0], "go", markersize=6, label="start")
        ax.plot(x[-1], y[-1], "r^", markersize=6, label="end")
    zones = log.column("zone")
    critical = zones >= 1
    if critical.any():
        ax.plot(x[critical], y[critical], ".", color="orange", markersize=3,
                label="critical zone")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    title = f"{log.meta.get('scenario', '')} / {log.meta.get('policy', '')}"
    ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def training_curves(metrics: list[dict], path) -> None:
    """Reward / goal-rate / heading curves from a metrics log."""
    if not metrics:
        return
    epochs = [m["epoch"] for m in metrics]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3))
    axes[0].plot(epochs, [m["mean_reward"] for m in metrics])
    axes[0].set_title("mean reward")
    axes[1].plot(epochs, [m["goal_rate"] for m in metrics], label="goal")
    axes[1].plot(epochs, [m["collision_rate"] for m in metrics], label="collision")
    axes[1].set_title("episode outcomes")
    axes[1].legend(fontsize=8)
    axes[2].plot(epochs, [m["mean_phi"] for m in metrics])
    axes[2].set_title("mean heading [rad]")
    for ax in axes:
        ax.set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _world_from_meta(meta: dict):
    from .evaluation import ScenarioSpec, build_scenario

    name = meta.get("scenario", "")
    try:
        kind = "box" if name.startswith("box") else "door"
        rest = name[len(kind):]
        size_s, _, angle_s = rest.partition("_a")
        spec = ScenarioSpec(kind, float(size_s), float(angle_s))
    except (ValueError, TypeError):
        return None
    world, _, _ = build_scenario(spec)
    return world


def _draw_world(ax, world) -> None:
    from matplotlib.patches import Circle as MplCircle
    from matplotlib.patches import Rectangle

    from .geometry import AxisBox, Circle, Segment

    h = world.arena_half_extent
    ax.add_patch(
        Rectangle((-h, -h), 2 * h, 2 * h, fill=False, edgecolor="black", linewidth=1.0)
    )
    for ob in world.obstacles:
        if isinstance(ob, Circle):
            ax.add_patch(
                MplCircle((ob.center.x, ob.center.y), ob.radius, color="dimgray")
            )
        elif isinstance(ob, AxisBox):
            ax.add_patch(
                Rectangle(
                    (ob.center.x - ob.half_extents.x, ob.center.y - ob.half_extents.y),
                    2 * ob.half_extents.x, 2 * ob.half_extents.y, color="dimgray",
                )
            )
        elif isinstance(ob, Segment):
            ax.plot(
                [ob.a.x, ob.b.x], [ob.a.y, ob.b.y],
                color="dimgray", linewidth=max(1.0, ob.thickness * 20),
                solid_capstyle="round",
            )
    pad = 0.3
    ax.set_xlim(-h - pad, h + pad)
    ax.set_ylim(-h - pad, h + pad)
