#!/usr/bin/env python3
"""Run the playtest and generation benchmarks for both baselines.

    python3 scripts/reproduce_tables.py --out results            # full protocol
    python3 scripts/reproduce_tables.py --out results --quick    # minutes, for a smoke run
"""

import argparse
import logging
import os
from pathlib import Path

from bossraid.harness import ExperimentConfig, run_generation_experiment, run_playtest_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--quick", action="store_true", help="cut every count by roughly 10x")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    scale = 10 if args.quick else 1

    for agent in ("heuristic", "random"):
        cfg = ExperimentConfig(mode="playtest", agent=agent, episodes=500 // scale, seed=args.seed,
                               workers=args.workers)
        logging.info("playtest %s", agent)
        run_playtest_experiment(cfg).write(out / f"playtest_{agent}", cfg.formats)

    for method in ("heuristic", "random"):
        cfg = ExperimentConfig(mode="generate", method=method, samples=100 // scale, episodes=100 // scale,
                               eval_episodes=300 // scale, seed=args.seed, workers=args.workers)
        logging.info("generate %s", method)
        run_generation_experiment(cfg).write(out / f"generate_{method}", cfg.formats)


if __name__ == "__main__":
    main()
