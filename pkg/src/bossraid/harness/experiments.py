"""Playtest and generation experiments at desk scale.

Episode streams follow ``derive_key(master_seed, setting, episode)`` for
playtests and ``derive_key(master_seed, target_index, sample_index, ...)`` for
generation, so each work item can be computed anywhere and merged by index.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..agents import make_policy
from ..content import GEN_PARAMS, ParamBounds, ScenarioConfig, resolve_scenario, validate_skill
from ..engine.core import play_keys, run_episode
from ..generators import STREAM_FINAL, GeneratedSkill, WinRateEvaluator, generate_one
from ..metrics import (
    ControllabilitySample, EmptyAfterFilter, WinRateEstimate, diversity_report, winrate_error,
)
from ..rng import derive_key
from .config import ExperimentConfig
from .report import Table, emit_report
from .runner import chunk_ranges, parallel_map

log = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    tables: list[Table]
    meta: dict
    files: dict[str, bytes] = field(default_factory=dict)  # extra artifacts, relative path -> bytes

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def write(self, out_dir: str | Path, formats: Sequence[str]) -> list[Path]:
        out = Path(out_dir)
        paths = emit_report(self.tables, out, formats, self.meta)
        for rel, data in sorted(self.files.items()):
            p = out / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_bytes(data)
            paths.append(p)
        return paths


# --------------------------------------------------------------------------
# playtest


def playtest_settings(scenario: ScenarioConfig, ranges: Sequence[float]) -> list[tuple[str, ScenarioConfig]]:
    """(label, scenario) per content setting; one per skill range, or the scenario as is."""
    if not ranges:
        return [("scenario", scenario)]
    return [(f"range={r:g}", scenario.with_player_param("range", float(r))) for r in ranges]


def playtest_keys(seed: int, setting: int, episodes: range) -> np.ndarray:
    return np.array([derive_key(seed, setting, e) for e in episodes], dtype=np.uint64)


def _playtest_chunk(args):
    scenario, policy, seed, setting, episodes, res = args
    b = play_keys(scenario, policy, playtest_keys(seed, setting, episodes), res)
    return b.wins, b.ticks, b.boss_hp, b.occupancy


def run_playtest_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    base = resolve_scenario(cfg.scenario)
    settings = playtest_settings(base, cfg.ranges)
    res = cfg.occupancy_resolution
    chunks = chunk_ranges(cfg.episodes, cfg.workers)
    work = [(sc, cfg.agent, cfg.seed, si, r, res) for si, (_, sc) in enumerate(settings) for r in chunks]
    parts = parallel_map(_playtest_chunk, work, cfg.workers)

    rates = Table("win_rates", ("setting", "agent", "episodes", "win_rate", "sd", "stderr",
                                "mean_duration_s", "mean_boss_hp_fraction"))
    occ_t = Table("occupancy", ("setting", "row", "col", "mean_ticks"), summary=False)
    logs_t = Table("episode_logs", ("setting", "episode", "win", "duration_ticks", "sha256"))
    files: dict[str, bytes] = {}
    estimates = []
    for si, (label, sc) in enumerate(settings):
        mine = parts[si * len(chunks):(si + 1) * len(chunks)]
        wins = np.concatenate([p[0] for p in mine])
        ticks = np.concatenate([p[1] for p in mine])
        boss = np.concatenate([p[2] for p in mine])
        occ = sum(p[3] for p in mine) / cfg.episodes
        p = float(wins.mean())
        est = WinRateEstimate(p, math.sqrt(p * (1.0 - p)), cfg.episodes, cfg.seed, cfg.agent)
        estimates.append(est)
        rates.add(label, cfg.agent, cfg.episodes, est.mean, est.sd, est.stderr,
                  float(ticks.mean()) * sc.tick_dt, float(boss.mean()) / sc.boss_max_hp)
        for r in range(res):
            for c in range(res):
                occ_t.add(label, r, c, float(occ[r, c]))
        for e in range(min(cfg.log_episodes, cfg.episodes)):
            outcome, lg = run_episode(sc, make_policy(cfg.agent), e,
                                      key=derive_key(cfg.seed, si, e))
            if bool(outcome.win) != bool(wins[e]):
                raise RuntimeError("logged episode diverged from the batch run")
            logs_t.add(label, e, outcome.win, outcome.duration_ticks, lg.sha256())
            files[f"logs/{label}/episode_{e:05d}.ndjson"] = lg.to_ndjson()

    summary = Table("table_win_rate", ("agent", *(label for label, _ in settings)))
    summary.add(cfg.agent, *(f"{e.mean:.3f} (±{e.sd:.3f})" for e in estimates))
    meta = {"title": "Playtest win rates", **cfg.to_dict()}
    tables = [summary, rates, occ_t] + ([logs_t] if cfg.log_episodes else [])
    return ExperimentResult(tables, meta, files)


# --------------------------------------------------------------------------
# generation


def _generation_chunk(args):
    scenario, cfg, items = args
    bounds = ParamBounds()
    base_skill = scenario.players[0].skills[0]
    in_loop = WinRateEvaluator(scenario, cfg.episodes, "heuristic", cfg.seed, cfg.common_random_numbers)
    final = WinRateEvaluator(scenario, cfg.eval_episodes, "heuristic", cfg.seed)
    out = []
    for ti, si in items:
        g = generate_one(cfg.method, cfg.targets[ti], cfg.horizon, bounds, base_skill,
                         in_loop, cfg.seed, (ti, si), cfg.delta)
        out.append((ti, g, final(g.skill, (ti, si, STREAM_FINAL))))
    return out


def _evaluation_chunk(args):
    scenario, cfg, records = args
    final = WinRateEvaluator(scenario, cfg.eval_episodes, "heuristic", cfg.seed)
    return [(ti, g, final(g.skill, (ti, g.sample, STREAM_FINAL))) for ti, g in records]


def _split(items: list, workers: int) -> list[list]:
    return [items[r.start:r.stop] for r in chunk_ranges(len(items), workers)]


def skill_record(ti: int, g: GeneratedSkill, bounds: ParamBounds, measured: float | None) -> dict:
    return {"target_index": ti, **g.record(bounds, measured)}


def skills_ndjson(rows: Sequence[tuple[int, GeneratedSkill, float]], bounds: ParamBounds) -> bytes:
    lines = [json.dumps(skill_record(ti, g, bounds, m), sort_keys=True) for ti, g, m in rows]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def read_skills(path: str | Path) -> list[tuple[int, GeneratedSkill]]:
    out = []
    for n, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            g = GeneratedSkill(float(rec["target"]), validate_skill(rec["skill"]),
                               rec.get("in_loop_win_rate"), int(rec["sample"]))
            out.append((int(rec.get("target_index", 0)), g))
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"{path}:{n}: bad skill record ({e})") from None
    return out


def _metric_tables(rows: Sequence[tuple[int, GeneratedSkill, float]], method: str,
                   bounds: ParamBounds, threshold: float) -> list[Table]:
    ctrl = Table("controllability", ("method", "target", "samples", "mean_abs_error", "sd"))
    div = Table("diversity", ("method", "target", "retained", "range_sd", "cool_sd", "cast_sd",
                              "damage_sd", "pca_sd"))
    samples_t = Table("samples", ("target", "sample", *GEN_PARAMS, *(f"scaled_{p}" for p in GEN_PARAMS),
                                  "in_loop_win_rate", "measured_win_rate"), summary=False)
    groups: dict[float, list[ControllabilitySample]] = {}
    for ti, g, m in rows:
        groups.setdefault(g.target, []).append(ControllabilitySample(g.target, m, g.skill))
        scaled = [(v - lo) / (hi - lo) if hi > lo else 0.0
                  for v, (lo, hi) in zip(g.skill.gen_values(), bounds.as_pairs())]
        samples_t.add(g.target, g.sample, *map(float, g.skill.gen_values()), *scaled,
                      g.in_loop_win_rate, m)

    def add(label, samples):
        err = winrate_error(samples)
        ctrl.add(method, label, len(samples), err.mean_abs_error, err.sd)
        try:
            d = diversity_report(samples, bounds, threshold)
            div.add(method, label, d.retained, d.range_sd, d.cool_sd, d.cast_sd, d.damage_sd, d.pca_sd)
        except EmptyAfterFilter:
            div.add(method, label, 0, None, None, None, None, None)

    for target in sorted(groups):
        add(f"{target:g}", groups[target])
    if groups:
        add("all", [s for t in sorted(groups) for s in groups[t]])
    return [ctrl, div, samples_t]


def run_generation_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Sample skills per target, then re-measure each with ``eval_episodes``."""
    cfg.validate()
    scenario = resolve_scenario(cfg.scenario)
    bounds = ParamBounds()
    items = [(ti, si) for ti in range(len(cfg.targets)) for si in range(cfg.samples)]
    parts = parallel_map(_generation_chunk, [(scenario, cfg, c) for c in _split(items, cfg.workers)],
                         cfg.workers)
    rows = [r for p in parts for r in p]
    meta = {"title": "Skill generation", **cfg.to_dict()}
    return ExperimentResult(_metric_tables(rows, cfg.method, bounds, cfg.diversity_threshold), meta,
                            {"skills.ndjson": skills_ndjson(rows, bounds)})


def run_evaluation_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Re-measure the skills in ``cfg.skills_file``."""
    cfg.validate()
    scenario = resolve_scenario(cfg.scenario)
    bounds = ParamBounds()
    records = read_skills(cfg.skills_file)
    parts = parallel_map(_evaluation_chunk, [(scenario, cfg, c) for c in _split(records, cfg.workers)],
                         cfg.workers)
    rows = [r for p in parts for r in p]
    meta = {"title": "Skill evaluation", **cfg.to_dict()}
    return ExperimentResult(_metric_tables(rows, cfg.method, bounds, cfg.diversity_threshold), meta,
                            {"skills.ndjson": skills_ndjson(rows, bounds)})


RUNNERS = {
    "playtest": run_playtest_experiment,
    "generate": run_generation_experiment,
    "evaluate": run_evaluation_experiment,
}
