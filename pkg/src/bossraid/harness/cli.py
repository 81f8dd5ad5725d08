"""Command line entry point.

Exit codes: 0 success, 1 invalid configuration or input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..content import ValidationError, resolve_scenario
from .config import AGENTS, DEFAULT_RANGES, DEFAULT_TARGETS, FORMATS, METHODS, ExperimentConfig
from .envserve import EnvSession, serve_socket, serve_stdio
from .experiments import RUNNERS
from .report import emit_report, load_json_report

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("bossraid")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _formats(text: str) -> tuple[str, ...]:
    out = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in out if x not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bossraid", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, episodes):
        sp.add_argument("--scenario", default="benchmark_default",
                        help="bundled scenario name or path to a scenario JSON")
        sp.add_argument("--episodes", type=int, default=episodes)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--format", type=_formats, default=FORMATS, help="comma list of json,csv,md")

    pt = sub.add_parser("playtest", help="win rates, occupancy and logs per content setting")
    common(pt, 500)
    pt.add_argument("--agent", choices=AGENTS, default="heuristic")
    pt.add_argument("--ranges", type=_floats, default=DEFAULT_RANGES,
                    help="skill ranges to sweep; empty string plays the scenario as is")
    pt.add_argument("--log-episodes", type=int, default=0, help="archive full logs of the first K episodes")
    pt.add_argument("--occupancy-resolution", type=int, default=20)

    for name, helptext in (("generate", "sample skills towards target win rates"),
                           ("evaluate", "re-measure the win rate of generated skills")):
        g = sub.add_parser(name, help=helptext)
        common(g, 100)
        g.add_argument("--method", choices=METHODS, default="heuristic")
        g.add_argument("--eval-episodes", type=int, default=300)
        if name == "generate":
            g.add_argument("--target", type=_floats, default=DEFAULT_TARGETS, help="comma list of targets")
            g.add_argument("--samples", type=int, default=100)
            g.add_argument("--horizon", type=int, default=50)
            g.add_argument("--delta", type=float, default=0.0008)
            g.add_argument("--common-random-numbers", action="store_true")
        else:
            g.add_argument("--skills", required=True, help="skills.ndjson written by generate")

    es = sub.add_parser("env-serve", help="serve the environment over newline-delimited JSON")
    es.add_argument("--mode", choices=("playtest", "generate"), default="playtest")
    es.add_argument("--transport", choices=("stdio", "socket"), default="stdio")
    es.add_argument("--host", default="127.0.0.1")
    es.add_argument("--port", type=int, default=0)
    es.add_argument("--scenario", default="benchmark_default")
    es.add_argument("--eval-episodes", type=int, default=100)
    es.add_argument("--horizon", type=int, default=50)

    rp = sub.add_parser("report", help="re-render a saved report.json")
    rp.add_argument("input", help="path to report.json")
    rp.add_argument("--out", required=True)
    rp.add_argument("--format", type=_formats, default=("csv", "md"))
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kw = dict(mode=args.command, scenario=args.scenario, episodes=args.episodes, seed=args.seed,
              workers=args.workers, out=args.out, formats=args.format)
    if args.command == "playtest":
        kw.update(agent=args.agent, ranges=args.ranges, log_episodes=args.log_episodes,
                  occupancy_resolution=args.occupancy_resolution)
    else:
        kw.update(method=args.method, eval_episodes=args.eval_episodes)
        if args.command == "generate":
            kw.update(targets=args.target, samples=args.samples, horizon=args.horizon, delta=args.delta,
                      common_random_numbers=args.common_random_numbers)
        else:
            kw.update(skills_file=args.skills)
    return ExperimentConfig(**kw).validate()


class ConfigError(Exception):
    pass


def prepare(args: argparse.Namespace):
    """Validate everything that can be checked before work starts; returns a thunk doing the work."""
    try:
        if args.command in RUNNERS:
            cfg = config_from_args(args)
            resolve_scenario(cfg.scenario)
            if cfg.mode == "evaluate" and not Path(cfg.skills_file).is_file():
                raise FileNotFoundError(f"no such skills file: {cfg.skills_file}")

            def work():
                for path in RUNNERS[cfg.mode](cfg).write(cfg.out, cfg.formats):
                    log.info("wrote %s", path)
            return work
        if args.command == "report":
            tables, meta = load_json_report(args.input)
            return lambda: emit_report(tables, args.out, args.format, meta)
        if args.command == "env-serve":
            scenario = resolve_scenario(args.scenario)

            def make():
                return EnvSession(args.mode, scenario, eval_episodes=args.eval_episodes, horizon=args.horizon)

            if args.transport == "stdio":
                return lambda: serve_stdio(make())
            return lambda: serve_socket(
                make, args.host, args.port,
                ready=lambda port: print(f"listening on {args.host}:{port}", file=sys.stderr, flush=True))
    except (ValidationError, ValueError, OSError, KeyError) as e:
        raise ConfigError(str(e)) from e
    raise AssertionError(args.command)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        work = prepare(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        work()
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
