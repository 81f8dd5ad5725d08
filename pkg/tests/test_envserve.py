import io
import json
import socket
import threading

import pytest

from bossraid.agents import observation_labels
from bossraid.harness.envserve import PROTOCOL_VERSION, EnvSession, serve_socket, serve_stream

from golden_session import GOLDEN, SCRIPT, play


def ask(session, **req):
    return json.loads(session.handle(json.dumps(req)))


@pytest.fixture
def playtest(scenario):
    s = EnvSession("playtest", scenario)
    assert ask(s, cmd="hello", protocol_version=PROTOCOL_VERSION)["ok"]
    return s


def test_golden_transcript_replays_byte_for_byte():
    assert len(SCRIPT) == 20
    assert play() == GOLDEN.read_text(encoding="utf-8")


def test_all_stay_keeps_player_positions(playtest):
    labels = observation_labels(3)
    pos = [k for k, name in enumerate(labels) if name.endswith((".x", ".y")) and not name.startswith("boss")]
    first = ask(playtest, cmd="reset", seed=1)
    for _ in range(3):
        r = ask(playtest, cmd="step", actions=[0, 0, 0])
        assert r["ok"] and not r["done"]
        for i in r["agents"]:
            assert [r["obs"][str(i)][k] for k in pos] == [first["obs"][str(i)][k] for k in pos]


def test_observation_lengths_match_published_size(playtest):
    r = ask(playtest, cmd="reset", seed=3)
    assert r["agents"] == [0, 1, 2]
    assert all(len(v) == len(observation_labels(3)) for v in r["obs"].values())
    assert len(r["rewards"]) == 3


def test_step_before_reset(scenario):
    r = ask(EnvSession("playtest", scenario), cmd="step", actions=[0, 0, 0])
    assert r == {"ok": False, "error": "not_initialized", "detail": "send reset before step"}


@pytest.mark.parametrize("line", ["", "{", "42", '"step"', '{"cmd": 5}'])
def test_malformed_lines_keep_session_alive(playtest, line):
    r = json.loads(playtest.handle(line))
    assert not r["ok"] and r["error"] in ("malformed", "unknown_command")
    assert not playtest.finished
    assert ask(playtest, cmd="reset", seed=0)["ok"]


def test_version_mismatch_ends_session(scenario):
    s = EnvSession("playtest", scenario)
    r = ask(s, cmd="hello", protocol_version=PROTOCOL_VERSION + 1)
    assert r["error"] == "version_mismatch" and s.finished
    out = io.StringIO()
    serve_stream(EnvSession("playtest", scenario), io.StringIO('{"cmd":"hello","protocol_version":0}\n{"cmd":"close"}\n'), out)
    assert len(out.getvalue().splitlines()) == 1


def test_close_is_idempotent(playtest):
    ask(playtest, cmd="reset", seed=0)
    assert ask(playtest, cmd="close") == ask(playtest, cmd="close") == {"ok": True, "closed": True}
    assert ask(playtest, cmd="step", actions=[0, 0, 0])["error"] == "not_initialized"


def test_sessions_are_deterministic_given_seed(scenario):
    def run():
        s = EnvSession("playtest", scenario)
        return [s.handle(json.dumps(r)) for r in (
            {"cmd": "reset", "seed": 9}, *({"cmd": "step", "actions": [1, 7, 3]} for _ in range(30)))]
    assert run() == run()


def test_episode_done_requires_reset(playtest):
    ask(playtest, cmd="reset", seed=0)
    r = {"done": False}
    while not r["done"]:
        r = ask(playtest, cmd="step", actions=[0, 0, 0])
    assert r["info"]["win"] is False
    assert ask(playtest, cmd="step", actions=[0, 0, 0])["error"] == "episode_done"


def test_one_response_per_request(scenario):
    out = io.StringIO()
    serve_stream(EnvSession("playtest", scenario), io.StringIO("\n".join(SCRIPT) + "\n"), out)
    assert len(out.getvalue().splitlines()) == len(SCRIPT)


class TestGenerateMode:
    @pytest.fixture
    def gen(self, scenario):
        return EnvSession("generate", scenario, eval_episodes=5, horizon=4)

    def test_reset_requires_target(self, gen):
        assert ask(gen, cmd="reset", seed=1)["error"] == "malformed"
        assert ask(gen, cmd="reset", seed=1, target=1.5)["error"] == "malformed"

    def test_episode_runs_to_horizon(self, gen):
        r = ask(gen, cmd="reset", seed=1, target=0.3)
        assert len(r["obs"]) == 4 and all(0.0 <= x <= 1.0 for x in r["obs"])
        rewards = []
        for t in range(4):
            r = ask(gen, cmd="step", action=[2, 2, 4, 0])
            rewards.append(r["reward"])
            assert r["info"]["t"] == t + 1
        assert r["done"]
        assert sum(rewards) == pytest.approx(0.3 - r["info"]["distance"], abs=1e-12)
        assert ask(gen, cmd="step", action=[2, 2, 2, 2])["error"] == "episode_done"

    @pytest.mark.parametrize("action", [[2, 2, 2], [0, 0, 0, 5], "up", None])
    def test_invalid_action(self, gen, action):
        ask(gen, cmd="reset", seed=1, target=0.3)
        assert ask(gen, cmd="step", action=action)["error"] == "invalid_action"


def test_socket_transport(scenario):
    ready = threading.Event()
    port = []

    def on_ready(p):
        port.append(p)
        ready.set()

    t = threading.Thread(target=serve_socket, args=(lambda: EnvSession("playtest", scenario),),
                         kwargs=dict(once=True, ready=on_ready), daemon=True)
    t.start()
    assert ready.wait(10)
    with socket.create_connection(("127.0.0.1", port[0]), timeout=10) as c, c.makefile("rw", newline="\n") as f:
        for req in SCRIPT:
            f.write(req + "\n")
            f.flush()
        got = [f.readline().rstrip("\n") for _ in SCRIPT]
    t.join(10)
    want = [json.loads(line)["response"] for line in GOLDEN.read_text(encoding="utf-8").splitlines()]
    assert got == want
