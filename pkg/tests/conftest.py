import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def default_scene():
    from reflectorsim.scene import make_corridor
    return make_corridor()


@pytest.fixture(scope="session")
def default_maps():
    """Coverage maps for the measured reflector set on the default corridor."""
    from reflectorsim.config import build_config, default_config
    from reflectorsim.sweep import run_grid

    maps = {}
    for variant in ("none", "plate12", "plate24", "plate33", "sphere", "cylinder"):
        cfg = build_config(default_config(variant))
        maps[variant] = run_grid(cfg.scene, cfg.grid, cfg.options, workers=1)
    return maps


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""
    def _report(number, name, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {name} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
