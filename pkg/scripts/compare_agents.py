"""Train every agent family on one grid size and tabulate the test metrics.

Hybrid agents are slow (each DQN update simulates a batch of 8-qubit
circuits), so ``--episodes`` and ``--agents`` allow reduced runs.

    python3 scripts/compare_agents.py --size 20 --agents qtable,mlp,snn
"""
import argparse
import json
import time

from qspirl.config import selected_config
from qspirl.evaluation import run_protocol
from qspirl.gridworld import preset
from qspirl.qtable import build_qtable
from qspirl.training import train


def fmt(v, digits=3):
    return "n/a" if v is None else f"{v:.{digits}f}"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=20, choices=[10, 20, 30, 40])
    p.add_argument("--agents", default="qtable,mlp,snn,qmlp,qsnn")
    p.add_argument("--episodes", type=int, help="override the episode budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, help="shot-sampled conversion for the hybrid agents")
    p.add_argument("--out")
    args = p.parse_args()
    results = {}
    print(f"| agent | SR | SPL | PL | TR | train s |\n|---|---|---|---|---|---|")
    for kind in args.agents.split(","):
        cfg = selected_config(kind, args.size)
        if args.episodes:
            cfg = cfg.replace(episodes=args.episodes)
        start = time.perf_counter()
        agent, _ = train(kind, preset(args.size, training=True), cfg, args.seed)
        seconds = time.perf_counter() - start
        shots = args.shots if kind in ("qmlp", "qsnn") else None
        report = run_protocol(build_qtable(agent, args.seed, shots), preset(args.size))
        results[kind] = {**report.to_dict(), "train_seconds": seconds}
        results[kind].pop("episodes")
        print(f"| {kind} | {report.sr:.2f} | {report.spl:.3f} | {fmt(report.pl_mean, 2)} | "
              f"{fmt(report.tr_mean)} | {seconds:.0f} |", flush=True)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=1)


if __name__ == "__main__":
    main()
