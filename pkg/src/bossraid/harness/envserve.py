"""Newline-delimited JSON environment server for external learners.

Every request line gets exactly one response line. Requests::

    {"cmd": "hello", "protocol_version": 1}
    {"cmd": "reset", "seed": 7}                      # generate mode also takes "target"
    {"cmd": "step", "actions": [0, 3, 7]}            # playtest: one action per player
    {"cmd": "step", "action": [2, 2, 4, 0]}          # generate: four branch indices 0..4
    {"cmd": "close"}

Responses carry ``"ok": true`` or ``"ok": false`` with an ``"error"`` code
(``malformed``, ``unknown_command``, ``not_initialized``, ``invalid_action``,
``episode_done``, ``version_mismatch``) and a human-readable ``"detail"``.
A malformed request never ends the session; a version mismatch does.
"""

from __future__ import annotations

import json
import math
import socket
import sys
from dataclasses import dataclass, field
from typing import IO, Any

from ..agents import observation_size, observe
from ..content import GEN_PARAMS, ParamBounds, ScenarioConfig
from ..engine.core import IllegalAction, init_episode, step
from ..engine.layout import EXECUTE_BASE, NSK
from ..generators import (
    DEFAULT_DELTA, DEFAULT_EVAL_EPISODES, DEFAULT_HORIZON, GenAction, gen_env_reset, gen_env_step,
    WinRateEvaluator,
)
from ..rng import CounterRNG, derive_key

PROTOCOL_VERSION = 1
MODES = ("playtest", "generate")


class ProtocolError(Exception):
    def __init__(self, code: str, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _floats(xs) -> list[float]:
    return [float(x) for x in xs]


def _int_field(req: dict, name: str, default: int | None = None) -> int:
    v = req.get(name, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ProtocolError("malformed", f"{name} must be a non-negative integer")
    return v


@dataclass
class EnvSession:
    """One client's session. ``handle`` maps a request line to a response line."""

    mode: str
    scenario: ScenarioConfig
    eval_episodes: int = DEFAULT_EVAL_EPISODES
    horizon: int = DEFAULT_HORIZON
    delta: float = DEFAULT_DELTA
    bounds: ParamBounds = field(default_factory=ParamBounds)
    state: Any = None
    finished: bool = False  # set by a version mismatch; the transport then hangs up

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    # -- dispatch

    def handle(self, line: str) -> str:
        try:
            try:
                req = json.loads(line)
            except json.JSONDecodeError as e:
                raise ProtocolError("malformed", f"invalid JSON: {e.msg}") from None
            if not isinstance(req, dict):
                raise ProtocolError("malformed", "request must be a JSON object")
            cmd = req.get("cmd")
            handler = {"hello": self._hello, "reset": self._reset, "step": self._step,
                       "close": self._close}.get(cmd) if isinstance(cmd, str) else None
            if handler is None:
                raise ProtocolError("unknown_command", f"unknown cmd {cmd!r}")
            return _dump({"ok": True, **handler(req)})
        except ProtocolError as e:
            return _dump({"ok": False, "error": e.code, "detail": e.detail})

    def _hello(self, req: dict) -> dict:
        version = req.get("protocol_version")
        if version != PROTOCOL_VERSION:
            self.finished = True
            raise ProtocolError("version_mismatch",
                                f"server speaks protocol_version {PROTOCOL_VERSION}, got {version!r}")
        info = {"protocol_version": PROTOCOL_VERSION, "mode": self.mode}
        if self.mode == "playtest":
            n = len(self.scenario.players)
            info.update(players=n, observation_size=observation_size(n),
                        action_counts=[EXECUTE_BASE + len(p.skills) for p in self.scenario.players])
        else:
            info.update(state_fields=list(GEN_PARAMS), action_branches=[5, 5, 5, 5], horizon=self.horizon)
        return info

    def _close(self, req: dict) -> dict:
        self.state = None
        return {"closed": True}

    def _reset(self, req: dict) -> dict:
        seed = _int_field(req, "seed", 0)
        return self._reset_playtest(seed) if self.mode == "playtest" else self._reset_generate(seed, req)

    def _step(self, req: dict) -> dict:
        if self.state is None:
            raise ProtocolError("not_initialized", "send reset before step")
        return self._step_playtest(req) if self.mode == "playtest" else self._step_generate(req)

    # -- playtest mode

    def _playtest_obs(self) -> dict:
        st = self.state
        living = st.living_players()
        return {"agents": living,
                "obs": {str(i): _floats(observe(st, i, self.bounds)) for i in living}}

    def _reset_playtest(self, seed: int) -> dict:
        self.state = init_episode(self.scenario, seed)
        n = self.state.n_players
        return {**self._playtest_obs(), "rewards": [0.0] * n, "group_reward": 0.0, "done": False,
                "info": {"tick": 0}}

    def _step_playtest(self, req: dict) -> dict:
        st = self.state
        if st.done:
            raise ProtocolError("episode_done", "episode finished; send reset")
        acts = req.get("actions")
        n = st.n_players
        if not isinstance(acts, list) or len(acts) != n:
            raise ProtocolError("invalid_action", f"actions must be a list of {n} integers")
        for i, a in enumerate(acts):
            if isinstance(a, bool) or not isinstance(a, int):
                raise ProtocolError("invalid_action", f"actions[{i}] must be an integer")
            if not 0 <= a < EXECUTE_BASE + int(st.ch[i, NSK]):
                raise ProtocolError("invalid_action", f"actions[{i}]={a} out of range")
        try:
            res = step(st, acts, inplace=True)
        except IllegalAction as e:
            raise ProtocolError("invalid_action", str(e)) from None
        rewards = [float(res.rewards.get(i, 0.0)) for i in range(n)]
        return {**self._playtest_obs(), "rewards": rewards, "group_reward": float(res.group_reward),
                "done": res.done,
                "info": {"tick": st.tick, "win": st.win, "events": len(res.events),
                         "rejected": sum(e.kind == "rejected_action" for e in res.events)}}

    # -- generate mode

    def _gen_view(self, reward: float) -> dict:
        ep = self.state
        return {"obs": _floats(ep.state.as_tuple()), "reward": float(reward), "done": ep.done,
                "info": {"t": ep.t, "win_rate": ep.win_rate, "distance": ep.distance,
                         "target": ep.target, "params": dict(zip(GEN_PARAMS, _floats(ep.skill.gen_values())))}}

    def _reset_generate(self, seed: int, req: dict) -> dict:
        target = req.get("target")
        if isinstance(target, bool) or not isinstance(target, (int, float)) or not 0.0 <= target <= 1.0 \
                or not math.isfinite(target):
            raise ProtocolError("malformed", "target must be a number in [0, 1]")
        evaluator = WinRateEvaluator(self.scenario, self.eval_episodes, "heuristic", seed)
        rng = CounterRNG(derive_key(seed, 0, 0, 1))
        self.state = gen_env_reset(self.bounds, float(target), rng, evaluator,
                                   self.scenario.players[0].skills[0], self.horizon, (0, 0))
        self._evaluator = evaluator
        return self._gen_view(0.0)

    def _step_generate(self, req: dict) -> dict:
        if self.state.done:
            raise ProtocolError("episode_done", "episode finished; send reset")
        try:
            action = GenAction.from_indices(req.get("action"))
        except (TypeError, ValueError) as e:
            raise ProtocolError("invalid_action", str(e)) from None
        self.state, reward, _ = gen_env_step(self.state, action, self._evaluator, self.delta)
        return self._gen_view(reward)


def serve_stream(session: EnvSession, inp: IO[str], out: IO[str]) -> None:
    for line in inp:
        if not line.strip():
            continue
        out.write(session.handle(line) + "\n")
        out.flush()
        if session.finished:
            break


def serve_stdio(session: EnvSession) -> None:
    serve_stream(session, sys.stdin, sys.stdout)


def serve_socket(make_session, host: str = "127.0.0.1", port: int = 0, once: bool = False,
                 ready=None) -> None:
    """Serve one client at a time; each connection gets a fresh session."""
    with socket.create_server((host, port)) as srv:
        if ready is not None:
            ready(srv.getsockname()[1])
        while True:
            conn, _ = srv.accept()
            with conn, conn.makefile("r", encoding="utf-8", newline="\n") as rf, \
                    conn.makefile("w", encoding="utf-8", newline="\n") as wf:
                serve_stream(make_session(), rf, wf)
            if once:
                return
