from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

SWEEP_EPS = [1e-4, 2.5e-4, 5e-4, 1e-3, 2.5e-3, 5e-3]

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_line(request):
    """Record one pass/fail line; the lines are printed in the terminal summary."""

    def record(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {name}  {detail}"
        request.config.stash[_ACCEPTANCE_KEY].append(line)
        print(line)

    return record


@pytest.fixture(scope="session")
def frozen() -> dict:
    return json.loads((HERE / "data" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def friction():
    from foldlab.models import make_friction

    return make_friction()


@pytest.fixture(scope="session")
def normal_form():
    from foldlab.models import make_normal_form

    return make_normal_form()


@pytest.fixture(scope="session")
def graze(friction):
    from foldlab.continuation import grazing_alpha

    return grazing_alpha(friction)


@pytest.fixture(scope="session")
def sqrt_sweep(friction, graze):
    from foldlab.continuation import scaling_sweep
    from foldlab.regfn import get_regfn

    return scaling_sweep(friction, get_regfn("smooth_sqrt"), SWEEP_EPS, graze)


@pytest.fixture(scope="session")
def gk_sweep(friction, graze):
    from foldlab.continuation import scaling_sweep
    from foldlab.regfn import get_regfn

    return scaling_sweep(friction, get_regfn("goldbeter_koshland"), SWEEP_EPS, graze)
