import json
import subprocess
import sys
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bossraid.content import ValidationError
from bossraid.harness import ExperimentConfig, Table, emit_report
from bossraid.harness.cli import main
from bossraid.harness.experiments import RUNNERS, read_skills
from bossraid.harness.report import fmt, load_json_report, to_json
from bossraid.harness.runner import chunk_ranges, parallel_map

from conftest import tree_bytes


def square(x):
    return x * x


class TestConfig:
    def test_defaults_follow_protocol_counts(self):
        c = ExperimentConfig()
        assert (c.episodes, c.samples, c.eval_episodes, c.horizon) == (500, 100, 300, 50)
        assert c.ranges == (5.0, 9.0, 13.0, 17.0)

    @pytest.mark.parametrize("kw, field", [
        (dict(samples=0), "samples"),
        (dict(episodes=-1), "episodes"),
        (dict(eval_episodes=0), "eval_episodes"),
        (dict(workers=0), "workers"),
        (dict(targets=(0.2, 1.5)), "targets[1]"),
        (dict(mode="train"), "mode"),
        (dict(agent="mapoca"), "agent"),
        (dict(formats=("xml",)), "formats"),
        (dict(mode="evaluate"), "skills_file"),
        (dict(mode="generate", targets=()), "targets"),
        (dict(episodes=True), "episodes"),
    ])
    def test_invalid_fields_are_reported(self, kw, field):
        issues = ExperimentConfig(**kw).issues()
        assert [i.path for i in issues] == [field]
        with pytest.raises(ValidationError):
            ExperimentConfig(**kw).validate()

    def test_report_meta_ignores_throughput_knobs(self):
        a = ExperimentConfig(workers=1, out="a").to_dict()
        b = ExperimentConfig(workers=8, out="b").to_dict()
        assert a == b and "workers" not in a


class TestRunner:
    @given(st.integers(0, 500), st.integers(1, 64))
    def test_chunks_partition_the_range(self, n, chunks):
        parts = chunk_ranges(n, chunks)
        assert [i for r in parts for i in r] == list(range(n))
        assert len(parts) <= chunks and all(len(r) for r in parts)
        if parts:
            assert max(map(len, parts)) - min(map(len, parts)) <= 1

    def test_parallel_map_keeps_order(self):
        items = list(range(23))
        assert parallel_map(square, items, 4) == parallel_map(square, items, 1) == [x * x for x in items]


class TestReport:
    def tables(self):
        t = Table("win_rates", ("setting", "win_rate", "ok"))
        t.add("range=5", 0.1234567, True)
        t.add("range=9", 1 / 3, False)
        return [t, Table("empty", ("a", "b"))]

    def test_fixed_float_format(self):
        assert fmt(1 / 3) == "0.333333" and fmt(2.0) == "2.000000" and fmt(None) == ""
        assert to_json({"b": 0.5, "a": [1, 2.25]}) == '{\n  "a": [1, 2.250000],\n  "b": 0.500000\n}'

    def test_same_results_same_bytes(self, tmp_path):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            emit_report(self.tables(), tmp_path / "a", meta={"seed": 1})
            emit_report(self.tables(), tmp_path / "b", meta={"seed": 1})
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_empty_table_gives_header_only_file_and_warning(self, tmp_path):
        with pytest.warns(UserWarning, match="empty"):
            emit_report(self.tables(), tmp_path, ("csv",))
        assert (tmp_path / "empty.csv").read_text() == "a,b\n"
        assert (tmp_path / "win_rates.csv").read_text() == \
            "setting,win_rate,ok\nrange=5,0.123457,true\nrange=9,0.333333,false\n"

    def test_markdown_layout(self, tmp_path):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            emit_report(self.tables(), tmp_path, ("md",), {"title": "T"})
        md = (tmp_path / "report.md").read_text()
        assert md.startswith("# T\n") and "| setting | win_rate | ok |" in md

    def test_json_round_trip_re_renders_identically(self, tmp_path):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            emit_report(self.tables(), tmp_path / "a", meta={"seed": 1})
            tables, meta = load_json_report(tmp_path / "a" / "report.json")
            emit_report(tables, tmp_path / "b", meta=meta)
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def small_playtest(**kw):
    return ExperimentConfig(mode="playtest", episodes=12, ranges=(5.0, 17.0), log_episodes=2, **kw)


def small_generation(**kw):
    return ExperimentConfig(mode="generate", method="heuristic", targets=(0.2, 0.6), samples=2,
                            episodes=4, eval_episodes=6, horizon=3, **kw)


class TestExperiments:
    def test_playtest_tables(self):
        r = RUNNERS["playtest"](small_playtest())
        rates = r.table("win_rates").rows
        assert [row[0] for row in rates] == ["range=5", "range=17"]
        assert all(row[2] == 12 and 0.0 <= row[3] <= 1.0 for row in rates)
        assert len(r.table("occupancy").rows) == 2 * 20 * 20
        assert sorted(r.files) == [f"logs/range={g}/episode_0000{e}.ndjson" for g in (17, 5) for e in (0, 1)]
        assert r.table("table_win_rate").rows[0][0] == "heuristic"

    def test_occupancy_mass_is_mean_living_ticks(self, scenario):
        r = RUNNERS["playtest"](ExperimentConfig(episodes=5, ranges=(9.0,), log_episodes=5))
        mass = sum(row[3] for row in r.table("occupancy").rows)
        living = 0
        for rel, data in r.files.items():
            events = [json.loads(x) for x in data.decode().splitlines()]
            end = max(e["tick"] for e in events)
            deaths = {e["actor"]: e["tick"] for e in events if e["kind"] == "death" and e["actor"] < 3}
            living += sum(deaths.get(i, end) for i in range(3))
        assert mass == pytest.approx(living / 5, abs=3.0)

    @pytest.mark.parametrize("make", [small_playtest, small_generation])
    def test_worker_count_does_not_change_bytes(self, tmp_path, make):
        for w in (1, 3):
            cfg = make(workers=w)
            RUNNERS[cfg.mode](cfg).write(tmp_path / f"w{w}", cfg.formats)
        assert tree_bytes(tmp_path / "w1") == tree_bytes(tmp_path / "w3")

    def test_generate_then_evaluate(self, tmp_path):
        cfg = small_generation()
        gen = RUNNERS["generate"](cfg)
        gen.write(tmp_path, ("json",))
        skills = read_skills(tmp_path / "skills.ndjson")
        assert len(skills) == 4 and [ti for ti, _ in skills] == [0, 0, 1, 1]
        ctrl = gen.table("controllability").rows
        assert [row[1] for row in ctrl] == ["0.2", "0.6", "all"]
        ev = RUNNERS["evaluate"](ExperimentConfig(mode="evaluate", eval_episodes=6,
                                                  skills_file=str(tmp_path / "skills.ndjson")))
        # same keys, same count: evaluation reproduces the generation-time measurement
        assert ev.table("controllability").rows == ctrl

    def test_bad_skills_file(self, tmp_path):
        p = tmp_path / "skills.ndjson"
        p.write_text('{"target": 0.3}\n')
        with pytest.raises(ValueError, match="skills.ndjson:1"):
            read_skills(p)


class TestCli:
    def test_playtest_writes_reports(self, tmp_path):
        rc = main(["playtest", "--episodes", "3", "--ranges", "5", "--out", str(tmp_path), "--format", "json,md"])
        assert rc == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json", "report.md"]

    def test_report_subcommand(self, tmp_path):
        assert main(["playtest", "--episodes", "3", "--ranges", "5,9", "--out", str(tmp_path / "a")]) == 0
        assert main(["report", str(tmp_path / "a" / "report.json"), "--out", str(tmp_path / "b"),
                     "--format", "csv,md"]) == 0
        a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
        assert all(a[k] == v for k, v in b.items())

    @pytest.mark.parametrize("argv", [
        ["generate", "--samples", "0"],
        ["playtest", "--episodes", "0"],
        ["playtest", "--scenario", "no_such_scenario"],
        ["generate", "--target", "1.2"],
        ["evaluate", "--skills", "/nonexistent/skills.ndjson"],
        ["playtest", "--format", "xml"],
        ["playtest", "--agent", "mapoca"],
    ])
    def test_validation_exit_code(self, tmp_path, argv, capsys):
        assert main([*argv, "--out", str(tmp_path / "o")]) == 1
        assert not (tmp_path / "o").exists()

    def test_runtime_exit_code(self, tmp_path):
        bad = tmp_path / "skills.ndjson"
        bad.write_text("not json\n")
        assert main(["evaluate", "--skills", str(bad), "--out", str(tmp_path / "o")]) == 2

    def test_env_serve_over_stdio(self):
        script = '{"cmd":"hello","protocol_version":1}\n{"cmd":"reset","seed":1}\n{"cmd":"close"}\n'
        p = subprocess.run([sys.executable, "-m", "bossraid", "env-serve"], input=script,
                           capture_output=True, text=True, timeout=120)
        assert p.returncode == 0
        lines = [json.loads(x) for x in p.stdout.splitlines()]
        assert [x["ok"] for x in lines] == [True, True, True]
