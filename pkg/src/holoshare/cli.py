"""Command-line entry points: train, eval, replay, and serve."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holoshare",
        description="Shared-control simulation, training and evaluation toolkit",
    )
    parser.add_argument(
        "--config", type=str, default=None,
        help="YAML run config; explicit flags override its values",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a policy with the curriculum")
    p_train.add_argument("--arch", required=True,
                         help="FC | LFC | CLFC | CLFC_D | SCLFC_D[_R1|_R2]")
    p_train.add_argument("--reward", default=None,
                         help="reward profile (FC_LFC | R1 | R2 or a model alias); "
                              "defaults to the profile matching the architecture")
    p_train.add_argument("--envs", default=None,
                         help="environment set, e.g. a,b,c or abcd (a=empty, b=cylinder, "
                              "c=box, d=door); defaults per architecture")
    p_train.add_argument("--epochs", type=int, default=300)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", default=None, help="output directory (default runs/<arch>)")
    p_train.add_argument("--checkpoint-every", type=int, default=25)
    p_train.add_argument("--resume", default=None, help="resume from a run directory")
    p_train.add_argument("--n-envs", type=int, default=128)
    p_train.add_argument("--horizon", type=int, default=128)
    p_train.add_argument("--minibatch-size", type=int, default=4096)
    p_train.add_argument("--mini-epochs", type=int, default=4)
    p_train.add_argument("--lr", type=float, default=5e-4)
    p_train.add_argument("--entropy-coef", type=float, default=1e-2)
    p_train.add_argument("--clip", type=float, default=0.2)
    p_train.add_argument("--gamma", type=float, default=0.99)
    p_train.add_argument("--gae-lambda", type=float, default=0.95)
    p_train.add_argument("--bptt-chunk", type=int, default=16,
                         help="BPTT sequence length for recurrent policies "
                              "(clamped to the horizon)")
    p_train.add_argument("--max-steps", type=int, default=1200,
                         help="episode step limit (30 s at the 40 Hz control rate)")
    p_train.add_argument("--box-length-range", default="1.0,4.0",
                         help="box lateral-extent randomization range, lo,hi meters")
    p_train.add_argument("--box-breadth-range", default="1.0,2.0",
                         help="box depth randomization range, lo,hi meters")
    p_train.add_argument("--door-width-range", default="0.9,1.75",
                         help="door opening randomization range, lo,hi meters")
    p_train.add_argument("--freeze-lcnn-after", type=int, default=None,
                         help="stop adapting the conv encoder after this epoch")
    p_train.add_argument("--obstacle-aggregation", choices=("max", "sum"), default="max",
                         help="critical-band penalty over rays: worst ray or sum")
    p_train.add_argument("--quiet", action="store_true")

    p_eval = sub.add_parser("eval", help="run the benchmark scenario grid")
    p_eval.add_argument("--policy", required=True, action="append",
                        help="checkpoint path, or rds / stub / zero (repeatable)")
    p_eval.add_argument("--scenarios", default="all",
                        help='"all" or filters like box:4,angle:20 or door:1.25')
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", default="eval_report")
    p_eval.add_argument("--vmax", type=float, default=0.67)
    p_eval.add_argument("--wmax", type=float, default=2.0)
    p_eval.add_argument("--max-steps", type=int, default=1200)
    p_eval.add_argument("--no-figures", action="store_true")

    p_replay = sub.add_parser("replay", help="recompute metrics from a trajectory log")
    p_replay.add_argument("logs", nargs="+", help="trajectory CSV files")
    p_replay.add_argument("--out", default="replay_report")
    p_replay.add_argument("--no-figures", action="store_true")

    p_serve = sub.add_parser("serve", help="realtime teleop simulation service")
    p_serve.add_argument("--policy", action="append", default=None,
                         help="policies to expose: rds / stub / zero / name=ckpt.json "
                              "(repeatable; default stub,rds)")
    p_serve.add_argument("--world", default="rooms",
                         help="a|b|c|d | rooms | path to a world YAML")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8710)
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--ui-dir", default=None,
                         help="static UI bundle (default: frontend/dist if present)")
    p_serve.add_argument("--vmax", type=float, default=0.67)
    p_serve.add_argument("--wmax", type=float, default=2.0)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Pre-scan for --config and install its values as parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        import yaml

        with open(known.config) as fh:
            loaded = yaml.safe_load(fh) or {}
        flat = {str(k).replace("-", "_"): v for k, v in loaded.items()}
        for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
            keys = {a.dest for a in action._actions}  # noqa: SLF001
            action.set_defaults(**{k: v for k, v in flat.items() if k in keys})
    return argv


def cmd_train(args) -> int:
    from .envs import EnvConfig, EnvKind
    from .geometry import LidarSpec
    from .nets import resolve_architecture
    from .ppo import PPOHyperparams, TrainRunConfig, train
    from .reward import resolve_reward_profile

    def parse_range(text):
        lo, _, hi = str(text).partition(",")
        return (float(lo), float(hi))

    from dataclasses import replace as dc_replace

    arch = resolve_architecture(args.arch)
    reward_name = args.reward or args.arch
    weights = resolve_reward_profile(reward_name)
    if weights.obstacle_aggregation != args.obstacle_aggregation:
        weights = dc_replace(weights, obstacle_aggregation=args.obstacle_aggregation)
    env_set = args.envs or arch.default_env_set
    out_base = os.environ.get("HOLOSHARE_OUT_DIR", "runs")
    out_dir = args.out or str(Path(out_base) / args.arch)
    hyper = PPOHyperparams(
        learning_rate=args.lr,
        entropy_coef=args.entropy_coef,
        eps_clip=args.clip,
        horizon=args.horizon,
        minibatch_size=args.minibatch_size,
        mini_epochs=args.mini_epochs,
        n_envs=args.n_envs,
        gamma=args.gamma,
        gae_lambda=args.gae_lambda,
        bptt_chunk=min(args.bptt_chunk, args.horizon, args.minibatch_size),
    )
    run = TrainRunConfig(
        seed=args.seed,
        arch=args.arch,
        reward_profile=reward_name,
        env_set=env_set,
        epochs=args.epochs,
        out_dir=out_dir,
        checkpoint_every=args.checkpoint_every,
        hyper=hyper,
        env=EnvConfig(
            EnvKind.EMPTY,
            lidar=LidarSpec(n_rays=arch.n_rays),
            max_steps=args.max_steps,
            box_length_range=parse_range(args.box_length_range),
            box_breadth_range=parse_range(args.box_breadth_range),
            door_width_range=parse_range(args.door_width_range),
        ),
        freeze_lcnn_after=args.freeze_lcnn_after,
    )

    def log(record, seconds):
        print(
            f"epoch {record['epoch']:4d}  reward {record['mean_reward']:8.3f}  "
            f"goal {record['goal_rate']:.2f}  collision {record['collision_rate']:.2f}  "
            f"phi {record['mean_phi']:.3f}  ({seconds:.1f}s)",
            file=sys.stderr,
        )

    state = train(run, weights, resume_from=args.resume,
                  log_fn=None if args.quiet else log)

    from . import plots

    plots.training_curves(state.metrics, Path(out_dir) / "training_curves.png")
    print(f"run complete: {out_dir}/policy.json after {state.epoch} epochs")
    return 0


def parse_scenario_filter(text: str):
    from .evaluation import scenario_grid

    grid = scenario_grid()
    if text.strip().lower() == "all":
        return grid
    box_sizes, door_sizes, angles = set(), set(), set()
    for token in text.replace(",", " ").split():
        key, _, value = token.partition(":")
        if not value:
            raise ValueError(f"bad scenario token {token!r} (expected kind:value)")
        if key == "box":
            box_sizes.add(float(value))
        elif key == "door":
            door_sizes.add(float(value))
        elif key == "angle":
            angles.add(float(value))
        else:
            raise ValueError(f"unknown scenario key {key!r}")
    selected = []
    for spec in grid:
        if spec.kind == "box" and box_sizes and spec.size not in box_sizes:
            continue
        if spec.kind == "door" and door_sizes and spec.size not in door_sizes:
            continue
        if box_sizes and not door_sizes and spec.kind == "door":
            continue
        if door_sizes and not box_sizes and spec.kind == "box":
            continue
        if angles and spec.incident_angle_deg not in angles:
            continue
        selected.append(spec)
    if not selected:
        raise ValueError(f"scenario filter {text!r} matches nothing")
    return selected


def cmd_eval(args) -> int:
    from dataclasses import replace as dc_replace

    from .evaluation import emit_report, run_scenario
    from .policies import make_policy_adapter

    scenarios = parse_scenario_filter(args.scenarios)
    scenarios = [
        dc_replace(s, v_max_lin=args.vmax, omega_max=args.wmax) for s in scenarios
    ]
    reports, logs = [], []
    for policy_spec in args.policy:
        adapter = make_policy_adapter(policy_spec)
        for spec in scenarios:
            log, report = run_scenario(
                spec, adapter, seed=args.seed, max_steps=args.max_steps
            )
            reports.append(report)
            logs.append(log)
            print(
                f"{spec.name:14s} {adapter.name:12s} "
                f"{'ok' if report.success else report.done_reason}",
                file=sys.stderr,
            )
    out = emit_report(reports, args.out, logs=logs, figures=not args.no_figures)
    print(f"wrote {len(reports)} reports to {out}")
    return 0


def cmd_replay(args) -> int:
    from .evaluation import TrajectoryLog, compute_report, emit_report

    reports, logs = [], []
    for path in args.logs:
        log = TrajectoryLog.load_csv(path)
        logs.append(log)
        reports.append(compute_report(log))
    emit_report(reports, args.out, logs=logs, figures=not args.no_figures)
    print(f"replayed {len(reports)} log(s) to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServeSettings, make_app

    settings = ServeSettings.build(
        policy_specs=args.policy or ["stub", "rds"],
        world=args.world,
        seed=args.seed,
        v_max_lin=args.vmax,
        omega_max=args.wmax,
        ui_dir=args.ui_dir,
    )
    app = make_app(settings)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "replay": cmd_replay,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
