#!/usr/bin/env python3
"""Drive ``bossraid env-serve`` over stdio with a uniformly random team.

Shows the request/response loop an external learner would implement.
"""

import argparse
import json
import random
import subprocess
import sys


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=3)
    args = p.parse_args()

    server = subprocess.Popen([sys.executable, "-m", "bossraid", "env-serve", "--mode", "playtest"],
                              stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1)

    def ask(**req):
        server.stdin.write(json.dumps(req) + "\n")
        server.stdin.flush()
        resp = json.loads(server.stdout.readline())
        if not resp["ok"]:
            raise RuntimeError(f"{resp['error']}: {resp['detail']}")
        return resp

    info = ask(cmd="hello", protocol_version=1)
    pick = random.Random(args.seed)
    for ep in range(args.episodes):
        r = ask(cmd="reset", seed=args.seed + ep)
        total = 0.0
        while not r["done"]:
            r = ask(cmd="step", actions=[pick.randrange(k) for k in info["action_counts"]])
            total += sum(r["rewards"]) + r["group_reward"]
        print(f"episode {ep}: win={r['info']['win']} ticks={r['info']['tick']} team_reward={total:.3f}")
    ask(cmd="close")
    server.stdin.close()
    server.wait()


if __name__ == "__main__":
    main()
