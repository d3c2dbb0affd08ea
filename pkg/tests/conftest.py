import pytest

from fwtrajopt.scenario import load_scenario_file, with_overrides
from fwtrajopt.solver import solve

from helpers import VERDICTS, sphere_spec, urban_paths


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, detail = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def small_spec():
    return sphere_spec()


@pytest.fixture(scope="session")
def suite_runs():
    """Solutions of every bundled urban scenario at n = 50 and n = 100, keyed by (name, n)."""
    runs = {}
    for n in (50, 100):
        for path in urban_paths():
            sc = with_overrides(load_scenario_file(path), n=n)
            runs[(path.stem, n)] = (sc, solve(sc.spec, sc.config))
    return runs
