"""Hyperparameter grid search with an optional random subsample of the space.

The full spiking space has 540 configurations; ``--sample`` draws a
reproducible subset for desk-scale runs.

    python3 scripts/grid_search.py --agent snn --size 10 --sample 12 --workers 1
"""
import argparse
import json

import numpy as np

from qspirl.config import TrainConfig, search_space
from qspirl.gridworld import preset
from qspirl.training import expand_space, grid_search, select_best


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--agent", default="snn", choices=["mlp", "snn", "qmlp", "qsnn"])
    p.add_argument("--size", type=int, default=10, choices=[10, 20, 30, 40])
    p.add_argument("--episodes", type=int, default=400)
    p.add_argument("--sample", type=int, help="evaluate this many random configurations")
    p.add_argument("--seeds", default="0")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="grid_search.json")
    args = p.parse_args()
    space = search_space(args.agent)
    if args.sample:
        combos = expand_space(space)
        pick = np.random.default_rng(0).choice(len(combos), size=min(args.sample, len(combos)), replace=False)
        # a space of singleton lists per sampled config would multiply out, so search them one by one
        rows = []
        for i in sorted(pick):
            single = {k: [v] for k, v in combos[i].items()}
            _, board = grid_search(args.agent, preset(args.size, training=True), single,
                                   [int(s) for s in args.seeds.split(",")], TrainConfig(episodes=args.episodes))
            rows.append({**board[0], "index": int(i)})
        winner, board = select_best(rows)
    else:
        winner, board = grid_search(args.agent, preset(args.size, training=True), space,
                                    [int(s) for s in args.seeds.split(",")], TrainConfig(episodes=args.episodes),
                                    workers=args.workers)
    for row in board[:10]:
        print(f"#{row['rank']} SR {row['sr']:.2f} PL {row['pl']} {row['config']}")
    print("below threshold" if winner["below_threshold"] else "winner passed the SR filter")
    with open(args.out, "w") as fh:
        json.dump({"winner": winner, "leaderboard": board}, fh, indent=1)


if __name__ == "__main__":
    main()
