"""Command-line entry point: train, gridsearch, convert, eval, render.

Configuration layers, later ones winning: built-in defaults, the selected
spiking hyperparameters for the agent and grid size, a JSON ``--config``
file, then ``--set key=value`` flags. Exit codes: 0 success, 1 runtime
failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import agents, evaluation, qtable, render, training
from .config import TrainConfig, search_space, selected_config
from .gridworld import GridSpec, preset
from .neural import TrainingError

log = logging.getLogger("qspirl")


class UsageError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    """``"2000..2004"`` (inclusive) or a comma list ``"1,5,9"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad seed range {text!r}") from None
    if not seeds:
        raise UsageError(f"empty seed range {text!r}")
    return seeds


def parse_overrides(items) -> dict:
    out: dict = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if key.startswith("reward."):
            out.setdefault("reward", {})[key[len("reward."):]] = value
        else:
            out[key] = value
    return out


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def build_config(kind: str, size: int | None, args) -> TrainConfig:
    cfg = selected_config(kind, size) if size is not None else TrainConfig()
    layers = []
    if getattr(args, "config", None):
        layers.append(load_json(args.config))
    flags = parse_overrides(getattr(args, "set", None))
    if getattr(args, "episodes", None) is not None:
        flags["episodes"] = args.episodes
    layers.append(flags)
    known = cfg.to_dict()
    for layer in layers:
        unknown = sorted(set(layer) - set(known))
        unknown += sorted(f"reward.{k}" for k in set(layer.get("reward", {})) - set(known["reward"]))
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        try:
            cfg = cfg.replace(**layer)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid configuration: {exc}") from None
    return cfg


def env_spec(args, training: bool) -> GridSpec:
    if getattr(args, "env_file", None):
        return GridSpec.from_dict({**load_json(args.env_file), "training_diagonal": training})
    try:
        return preset(args.env, training=training)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _progress(every: int):
    def report(entry):
        if every and (entry.episode + 1) % every == 0:
            log.info("episode %d return %.2f steps %d %s", entry.episode + 1, entry.ret, entry.steps,
                     entry.outcome)
    return report


def cmd_train(args) -> int:
    kind = agents.canonical_kind(args.agent)
    cfg = build_config(kind, args.env, args)
    spec = env_spec(args, training=True)
    agent, logs = training.train(kind, spec, cfg, args.seed, _progress(args.log_every))
    out = args.out or f"{kind}_g{spec.size}_s{args.seed}" + (".qtable" if kind == "qtable" else ".json")
    if kind == "qtable":
        qtable.write_qtable(qtable.build_qtable(agent, args.seed, config_digest=cfg.digest()), out)
    else:
        agents.save_model(agent, out, spec.with_diagonal(False), cfg)
    log_path = args.log or out + ".log.csv"
    training.write_episode_log(log_path, logs)
    wins = sum(e.outcome == "goal" for e in logs)
    print(f"trained {kind} for {len(logs)} episodes ({wins} reached the goal) -> {out}")
    return 0


def cmd_convert(args) -> int:
    out = args.out or os.path.splitext(args.model)[0] + ".qtable"
    if qtable.is_qtable_file(args.model):
        if args.shots is not None:
            raise UsageError("--shots applies to quantum models only")
        table = qtable.read_qtable(args.model)
    else:
        agent, _, cfg = agents.load_model(args.model)
        if args.shots is not None and agent.quantum_layer is None:
            raise UsageError("--shots applies to quantum models only")
        table = qtable.build_qtable(agent, args.seed, args.shots, cfg.digest() if cfg else "")
    qtable.write_qtable(table, out)
    print(f"wrote {out}")
    return 0


def cmd_eval(args) -> int:
    if args.shots is not None:
        raise UsageError("eval reads Q-tables only; apply --shots when converting a quantum model")
    table = qtable.read_qtable(args.table)
    spec = env_spec(args, training=False)
    seeds = parse_seeds(args.seeds)
    report, records = evaluation.run_protocol(table, spec, seeds, return_records=True, workers=args.workers)
    out = args.out or os.path.splitext(args.table)[0] + ".report.json"
    with open(out, "w") as fh:
        fh.write(report.to_json())
    if args.trajectories:
        os.makedirs(args.trajectories, exist_ok=True)
        for rec in records:
            evaluation.write_trajectory(rec, spec, os.path.join(args.trajectories, f"episode_{rec.seed}.csv"))
    pl = "n/a" if report.pl_mean is None else f"{report.pl_mean:.2f} +/- {report.pl_se:.2f}"
    tr = "n/a" if report.tr_mean is None else f"{report.tr_mean:.3f} +/- {report.tr_se:.3f}"
    print(f"SR {report.sr:.3f}  SPL {report.spl:.3f}  PL {pl}  TR {tr}  n={report.n} -> {out}")
    return 0


def cmd_render(args) -> int:
    spec, seed, cells, _, actions = evaluation.read_trajectory(args.trajectory)
    try:
        statics, replayed, traces = render.replay(spec, seed, actions)
    except (RuntimeError, ValueError) as exc:
        raise evaluation.TrajectoryError(f"trajectory does not replay: {exc}") from None
    if replayed != cells:
        raise evaluation.TrajectoryError("trajectory cells disagree with the replayed episode")
    out = args.out or os.path.splitext(args.trajectory)[0] + ".svg"
    with open(out, "w") as fh:
        fh.write(render.render_svg(spec, statics, cells, traces))
    print(f"wrote {out}")
    return 0


def cmd_gridsearch(args) -> int:
    kind = agents.canonical_kind(args.agent)
    if kind == "qtable":
        raise UsageError("grid search covers the neural agents")
    space = load_json(args.space) if args.space else search_space(kind)
    if not space or any(not isinstance(v, list) or not v for v in space.values()):
        raise UsageError("empty search space")
    base = build_config(kind, None, args)
    unknown = set(space) - set(base.to_dict())
    if unknown:
        raise UsageError(f"unknown search keys: {sorted(unknown)}")
    spec = env_spec(args, training=True)
    seeds = parse_seeds(args.seeds)
    test_seeds = parse_seeds(args.test_seeds)
    winner, board = training.grid_search(kind, spec, space, seeds, base, args.workers,
                                         args.max_configs, test_seeds=test_seeds)
    out = args.out or f"gridsearch_{kind}_g{spec.size}.json"
    with open(out, "w") as fh:
        json.dump({"kind": kind, "environment": spec.to_dict(), "seeds": seeds, "winner": winner,
                   "leaderboard": board}, fh, indent=1)
        fh.write("\n")
    print(f"{len(board)} configurations; best {winner['config']} SR {winner['sr']:.3f}"
          + (" (below the SR threshold)" if winner["below_threshold"] else "") + f" -> {out}")
    if args.model_out:
        cfg = base.replace(**winner["config"])
        agent, _ = training.train(kind, spec, cfg, seeds[0])
        agents.save_model(agent, args.model_out, spec.with_diagonal(False), cfg)
        print(f"wrote {args.model_out}")
    return 0


def _env_args(p, default=20):
    p.add_argument("--env", type=int, default=default, help="grid preset: 10, 20, 30 or 40")
    p.add_argument("--env-file", help="JSON grid description (overrides --env)")


def _shared(p):
    p.add_argument("--config", help="JSON TrainConfig overrides")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qspirl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one agent")
    _shared(p)
    _env_args(p)
    p.add_argument("--agent", required=True, choices=list(agents.KINDS) + sorted(agents.ALIASES))
    p.add_argument("--episodes", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override, e.g. lr=0.001")
    p.add_argument("--log", help="episode log path (default: <out>.log.csv)")
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", help="convert a model file into a Q-table")
    _shared(p)
    p.add_argument("model")
    p.add_argument("--shots", type=int, help="sampled circuit expectations (quantum models)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("eval", help="run the held-out test protocol on a Q-table")
    _shared(p)
    _env_args(p)
    p.add_argument("table")
    p.add_argument("--seeds", default="2000..2099")
    p.add_argument("--trajectories", help="directory for per-episode trajectory files")
    p.add_argument("--shots", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="draw a trajectory file as SVG")
    _shared(p)
    p.add_argument("trajectory")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gridsearch", help="search spiking/activation hyperparameters")
    _shared(p)
    _env_args(p)
    p.add_argument("--agent", required=True, choices=list(agents.KINDS) + sorted(agents.ALIASES))
    p.add_argument("--space", help="JSON object mapping config keys to value lists")
    p.add_argument("--seeds", default="0", help="training seeds")
    p.add_argument("--test-seeds", default="2000..2099")
    p.add_argument("--max-configs", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--model-out", help="retrain the winner and write its model file")
    p.set_defaults(func=cmd_gridsearch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (TrainingError, qtable.ConversionError) as exc:
        print(f"qspirl: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"qspirl: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
