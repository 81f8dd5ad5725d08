import json

import pytest
from hypothesis import HealthCheck, settings

from bossraid.content import benchmark_scenario, bundled_scenario_text, load_scenario

settings.register_profile(
    "repo", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def scenario():
    return benchmark_scenario()


@pytest.fixture
def scenario_doc():
    return json.loads(bundled_scenario_text())


def make_scenario(doc: dict):
    return load_scenario(json.dumps(doc))


def tree_bytes(root) -> dict[str, bytes]:
    """Relative path -> content for every file under ``root``."""
    from pathlib import Path

    root = Path(root)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
