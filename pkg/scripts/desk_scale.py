"""Desk-scale learning runs over several training seeds.

Trains the tabular agent on 20x20 and the MLP/SNN agents on 10x10, converts
each to a Q-table and evaluates on the held-out seeds. Prints a per-seed
table and the mean SR per agent.

    python3 scripts/desk_scale.py --seeds 0,1,2 --out desk_scale.json
"""
import argparse
import json
import time

import numpy as np

from qspirl.config import selected_config
from qspirl.evaluation import run_protocol
from qspirl.gridworld import preset
from qspirl.qtable import build_qtable
from qspirl.training import train

RUNS = [("qtable", 20, 800), ("mlp", 10, 400), ("snn", 10, 400)]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--agents", default="qtable,mlp,snn")
    p.add_argument("--episode-scale", type=float, default=1.0, help="multiply the episode budgets")
    p.add_argument("--out")
    args = p.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    wanted = set(args.agents.split(","))
    rows = []
    for kind, size, episodes in RUNS:
        if kind not in wanted:
            continue
        cfg = selected_config(kind, size).replace(episodes=int(episodes * args.episode_scale))
        for seed in seeds:
            start = time.perf_counter()
            agent, logs = train(kind, preset(size, training=True), cfg, seed)
            report = run_protocol(build_qtable(agent, seed), preset(size))
            rows.append({"agent": kind, "size": size, "episodes": cfg.episodes, "seed": seed,
                         "sr": report.sr, "spl": report.spl, "pl": report.pl_mean, "tr": report.tr_mean,
                         "train_goals": sum(e.outcome == "goal" for e in logs),
                         "seconds": round(time.perf_counter() - start, 1)})
            r = rows[-1]
            print(f"{kind:7s} {size}x{size} seed {seed}: SR {r['sr']:.2f} SPL {r['spl']:.2f} "
                  f"({r['seconds']}s)", flush=True)
    print()
    for kind in dict.fromkeys(r["agent"] for r in rows):
        srs = [r["sr"] for r in rows if r["agent"] == kind]
        print(f"{kind:7s} mean SR {np.mean(srs):.3f} over {len(srs)} seeds")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
