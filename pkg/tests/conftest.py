import numpy as np
import pytest

from pmusynth.fixtures import load_mini_case, make_fixtures


@pytest.fixture(scope="session")
def mini_case():
    return load_mini_case()


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """Fixture input workspace shared by pipeline-level tests (read-only)."""
    root = tmp_path_factory.mktemp("workspace")
    return make_fixtures(root)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
