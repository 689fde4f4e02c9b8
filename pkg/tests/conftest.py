import functools

import pytest

from iegmsim import load_scenario_file, run_simulation
from iegmsim.scenario import BUILTIN_DIR, load_scenario


@functools.lru_cache(maxsize=None)
def builtin_trace(name: str):
    return run_simulation(load_scenario_file(name))


def variant(toml: str, name: str = "variant"):
    """Scenario built on top of the baseline with extra TOML."""
    return load_scenario('[run]\nextends = "baseline"\n' + toml, name, base_dir=BUILTIN_DIR)


@pytest.fixture(scope="session")
def baseline():
    return load_scenario_file("baseline")


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i, ok, detail in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance._line(i, ok, detail))
