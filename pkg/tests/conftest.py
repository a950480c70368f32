import functools

import pytest

from poscascade.config import PRESETS, parse_config
from poscascade.sim import run_scenario


@functools.lru_cache(maxsize=None)
def preset_run(name: str, *overrides: str):
    cfg = parse_config(name, list(overrides))
    return cfg, run_scenario(cfg.scenario, cfg.sim)


@pytest.fixture(scope="session")
def runs():
    return {name: preset_run(name)[1] for name in PRESETS}


ACCEPTANCE: dict = {}


def record(number: int, ok: bool, detail: str):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
