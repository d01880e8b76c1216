import numpy as np
import pytest

import csiloc

# Acceptance tests append (criterion, name, passed, detail) here; the
# terminal summary replays them so the lines show up even with capture on.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({name}): {status} — {detail}")


@pytest.fixture(scope="session")
def small_scenario():
    """Fast 8x8 scenario with a 12x12 grid."""
    return csiloc.synthetic_scenario(grid_rows=12, grid_cols=12, rng_seed=0)


@pytest.fixture(scope="session")
def small_samples(small_scenario):
    return csiloc.generate_dataset(small_scenario)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
