from __future__ import annotations

from dataclasses import asdict, dataclass

from ..content import Issue, ValidationError

MODES = ("playtest", "generate", "evaluate")
AGENTS = ("heuristic", "random")
METHODS = ("heuristic", "random")
FORMATS = ("json", "csv", "md")
DEFAULT_RANGES = (5.0, 9.0, 13.0, 17.0)
DEFAULT_TARGETS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's output bytes.

    ``episodes`` is the playtest episode count per content setting, or the
    in-loop evaluation count inside generation. ``eval_episodes`` re-measures
    each generated skill. An empty ``ranges`` playtests the scenario as given.
    """

    mode: str = "playtest"
    scenario: str = "benchmark_default"
    agent: str = "heuristic"
    method: str = "heuristic"
    ranges: tuple[float, ...] = DEFAULT_RANGES
    targets: tuple[float, ...] = DEFAULT_TARGETS
    episodes: int = 500
    samples: int = 100
    eval_episodes: int = 300
    horizon: int = 50
    delta: float = 0.0008
    seed: int = 0
    workers: int = 1
    out: str | None = None
    formats: tuple[str, ...] = ("json", "csv", "md")
    log_episodes: int = 0
    occupancy_resolution: int = 20
    diversity_threshold: float = 0.1
    common_random_numbers: bool = False
    skills_file: str | None = None

    def issues(self) -> list[Issue]:
        out: list[Issue] = []

        def enum(name, allowed):
            v = getattr(self, name)
            if v not in allowed:
                out.append(Issue("invalid_enum", name, v, allowed))

        def at_least(name, lo):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < lo:
                out.append(Issue("out_of_range", name, v, (lo, "inf")))

        enum("mode", MODES)
        enum("agent", AGENTS)
        enum("method", METHODS)
        for f in self.formats:
            if f not in FORMATS:
                out.append(Issue("invalid_enum", "formats", f, FORMATS))
        for name in ("episodes", "samples", "eval_episodes", "horizon", "workers", "occupancy_resolution"):
            at_least(name, 1)
        at_least("log_episodes", 0)
        at_least("seed", 0)
        for i, t in enumerate(self.targets):
            if not 0.0 <= t <= 1.0:
                out.append(Issue("out_of_range", f"targets[{i}]", t, (0.0, 1.0)))
        if self.mode == "generate" and not self.targets:
            out.append(Issue("empty", "targets"))
        for i, r in enumerate(self.ranges):
            if not 1.0 <= r <= 20.0:
                out.append(Issue("out_of_range", f"ranges[{i}]", r, (1.0, 20.0)))
        if not 0.0 < self.delta <= 1.0:
            out.append(Issue("out_of_range", "delta", self.delta, (0.0, 1.0)))
        if self.mode == "evaluate" and not self.skills_file:
            out.append(Issue("missing", "skills_file"))
        return out

    def validate(self) -> "ExperimentConfig":
        issues = self.issues()
        if issues:
            raise ValidationError(issues)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")  # throughput knob; must not change the report
        return d
