"""Command-line entry point: ``blimplab {train,eval,sweep,plot,verify}``.

Every subcommand that produces files also writes the resolved
configuration (``config.toml``) into its output directory; passing that
file back with ``--config`` repeats the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_SWEEP_VALUES, load_config, parse_value, write_snapshot
from .env import BlimpEnv
from .errors import BlimpLabError, ConfigError
from .harness import (
    evaluate_returns, idle_at_target_return, make_policy, run_hover, run_navigation,
    square_track, sweep,
)

log = logging.getLogger("blimplab")

SWEEP_PARAM_NAMES = {"wind": "wind_speed", "buoyancy": "buoyancy_factor", "ballast": "ballast_mass"}


class UsageError(Exception):
    pass


def _parse_set(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = parse_value(value.strip())
    return out


def _resolve(args, extra=None):
    overrides = _parse_set(args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    overrides.update(extra or {})
    return load_config(args.config, overrides=overrides)


def _agent_from(cfg):
    from .qrdqn import load_checkpoint
    if not cfg.task.checkpoint:
        raise UsageError("the rl policy needs --checkpoint (or task.checkpoint in the config)")
    return load_checkpoint(cfg.task.checkpoint, cfg.agent.config_hash())


def _policy_factory(cfg):
    agent = _agent_from(cfg) if cfg.task.policy == "rl" else None
    return partial(make_policy, cfg.task.policy, agent, cfg.pid, cfg.seed)


def _track(cfg):
    t = cfg.task
    return square_track(t.side, t.altitude, t.trigger_radius, t.laps)


def _hover_kwargs(cfg):
    t = cfg.task
    target = (0.0, 0.0, -t.altitude)
    return {"target": target, "duration": t.hover_duration,
            "spawn": (0.0, 0.0, -(t.altitude + t.hover_spawn_offset))}


# ------------------------------------------------------------------ commands

def cmd_train(args):
    from .qrdqn import QRDQNAgent, save_checkpoint, train
    extra = {"agent.schedule.total_steps": args.steps} if args.steps is not None else {}
    cfg = _resolve(args, extra)
    out = Path(cfg.output_dir)
    write_snapshot(cfg, out)
    env = BlimpEnv(cfg.env, cfg.dynamics, cfg.task.wind())
    agent = QRDQNAgent(cfg.agent_config())

    def progress(row):
        episode, step, ret, loss, eps = row
        log.info("episode %d  step %d  return %.2f  loss %.4f  eps %.3f", episode, step, ret, loss, eps)

    result = train(env, agent, cfg.train_schedule(), metrics_path=out / "metrics.csv",
                   checkpoint_dir=out / "checkpoints", progress=progress)
    save_checkpoint(agent, out / "agent.ckpt")
    print(f"trained {agent.env_steps} steps, {len(result.metrics)} episodes, "
          f"{result.skipped_updates} skipped updates -> {out / 'agent.ckpt'}")
    return 0


def cmd_eval(args):
    extra = {}
    if args.policy:
        extra["task.policy"] = args.policy
    if args.task:
        extra["task.task"] = args.task
    if args.checkpoint:
        extra["task.checkpoint"] = args.checkpoint
    cfg = _resolve(args, extra)
    out = Path(cfg.output_dir)
    write_snapshot(cfg, out)
    policy = _policy_factory(cfg)()
    t = cfg.task

    if args.returns:
        rets = evaluate_returns(policy, t.eval_episodes, cfg.env, cfg.dynamics, t.wind(), cfg.seed)
        summary = {"policy": t.policy, "episodes": t.eval_episodes, "mean_return": float(np.mean(rets)),
                   "std_return": float(np.std(rets)), "returns": rets,
                   "idle_at_target": idle_at_target_return(cfg.env, cfg.dynamics, cfg.seed)}
        path = out / f"returns_{t.policy}.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        print(f"{t.policy}: mean return {summary['mean_return']:.2f} over {t.eval_episodes} "
              f"episodes -> {path}")
        return 0

    if t.task == "nav-square":
        report = run_navigation(policy, _track(cfg), cfg.env, cfg.dynamics, t.wind(), cfg.seed,
                                t.timeout)
    else:
        report = run_hover(policy, env_config=cfg.env, params=cfg.dynamics, wind=t.wind(),
                           seed=cfg.seed, **_hover_kwargs(cfg))
    stem = out / f"{t.task}_{t.policy}"
    report.write(stem)
    if t.task == "nav-square":
        status = "completed" if report.completed else "not completed"
        print(f"{t.task} / {t.policy}: {status}, {report.n_triggers} triggers, "
              f"{report.total_time:.1f} s -> {stem}.csv")
    else:
        print(f"{t.task} / {t.policy}: mean radius {report.mean_planar_radius or 0.0:.2f} m, "
              f"altitude bias {report.altitude_bias or 0.0:+.2f} m -> {stem}.csv")
    return 0


def cmd_sweep(args):
    extra = {}
    if args.policy:
        extra["task.policy"] = args.policy
    if args.task:
        extra["task.task"] = args.task
    if args.checkpoint:
        extra["task.checkpoint"] = args.checkpoint
    if args.workers is not None:
        extra["task.workers"] = args.workers
    if args.values is not None:
        extra["task.sweep_values"] = [float(v) for v in args.values]
    cfg = _resolve(args, extra)
    parameter = SWEEP_PARAM_NAMES[args.param]
    values = cfg.task.sweep_values or DEFAULT_SWEEP_VALUES[parameter]
    out = Path(cfg.output_dir)
    write_snapshot(cfg, out)
    t = cfg.task
    task_kw = ({"track": _track(cfg), "timeout": t.timeout} if t.task == "nav-square"
               else _hover_kwargs(cfg))
    report = sweep(_policy_factory(cfg), parameter, values, t.task, cfg.dynamics, t.wind(),
                   t.wind_heading, cfg.env, cfg.seed, t.workers, **task_kw)
    for cell in report.cells:
        if cell.report is not None:
            cell.report.write(out / f"sweep_{args.param}_{cell.value:g}")
    path = out / f"sweep_{args.param}.json"
    path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    for row in report.summary()["cells"]:
        if row["error"]:
            print(f"{parameter}={row['value']:g}: error {row['error']}")
        else:
            ttc = f"{row['time_to_complete']:.1f} s" if row["completed"] else "not completed"
            print(f"{parameter}={row['value']:g}: {ttc}, {row['n_triggers']} triggers")
    return 0


def cmd_plot(args):
    from .plotting import plot_metrics, plot_trajectory
    for path in args.csv:
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip()
        if header.startswith("episode,"):
            written = plot_metrics(path, args.out)
        else:
            written = plot_trajectory(path, args.out)
        for w in written:
            print(w)
    return 0


def cmd_verify(args):
    from .verify import run_all
    results = run_all(quick=args.quick)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.ok]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return 1
    print("all checks passed")
    return 0


# -------------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key, e.g. env.noise_std=0 (repeatable)")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--out", help="output directory")


def _policy_args(p):
    p.add_argument("--policy", choices=("rl", "pid", "random", "idle"))
    p.add_argument("--task", choices=("nav-square", "hover"))
    p.add_argument("--checkpoint", help="agent checkpoint for --policy rl")


def build_parser():
    parser = argparse.ArgumentParser(prog="blimplab", description="Blimp navigation lab.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a QR-DQN agent")
    _common(p)
    p.add_argument("--steps", type=int, help="total environment steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run one task with one policy")
    _common(p)
    _policy_args(p)
    p.add_argument("--returns", action="store_true",
                   help="mean episode return over task.eval_episodes training-style episodes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="robustness sweep over one parameter")
    _common(p)
    _policy_args(p)
    p.add_argument("--param", required=True, choices=tuple(SWEEP_PARAM_NAMES))
    p.add_argument("--values", nargs="+", type=float, help="parameter values (default grid otherwise)")
    p.add_argument("--workers", type=int, help="concurrent worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render trajectory or metrics CSVs to SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", help="directory for the SVG files (default: next to the CSV)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="run the invariant self-checks")
    p.add_argument("--quick", action="store_true", help="fewer gradient seeds and energy steps")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"blimplab: error: {exc}", file=sys.stderr)
        return 2
    except (BlimpLabError, OSError, ValueError) as exc:
        print(f"blimplab {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
