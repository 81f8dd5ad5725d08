from .core import (
    BatchResult, CombatState, CompiledScenario, DamageRoll, EpisodeLog,
    EpisodeOutcome, Event, IllegalAction, StepResult, boss_policy,
    compile_scenario, compute_damage, init_episode, is_back_attack, play_batch,
    init_from_key, play_keys, run_episode, step,
)

__all__ = [
    "BatchResult", "CombatState", "CompiledScenario", "DamageRoll", "EpisodeLog",
    "EpisodeOutcome", "Event", "IllegalAction", "StepResult", "boss_policy",
    "compile_scenario", "compute_damage", "init_episode", "is_back_attack",
    "init_from_key", "play_batch", "play_keys", "run_episode", "step",
]
