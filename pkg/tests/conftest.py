"""Shared fixtures: annihilators at default budgets are built once per session."""
import numpy as np
import pytest

from gausspf.annihilator import (
    F2_SHAPES, Budget, build_annihilator, build_annihilator_plus, f2_shape, psi_zero,
)

# criterion lines collected by tests/test_acceptance.py and echoed at the end
ACCEPTANCE_LINES: list[str] = []

SMALL = Budget(n_cells=1024, n_cells_f2=1024, j_trunc=2000)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def two_sided_family():
    """Five annihilators at beta = 2 from linearly independent f2 shapes."""
    return {name: build_annihilator(2.0, f2_shape(name, 2.0)) for name in F2_SHAPES[:5]}


@pytest.fixture(scope="session")
def half_line_hat():
    return build_annihilator_plus(2.0, f2_shape("hat", 2.0))


@pytest.fixture(scope="session")
def psi0_beta2():
    return psi_zero(2.0)


@pytest.fixture(scope="session")
def small_hat():
    """Cheap annihilator for structural checks."""
    return build_annihilator(2.0, f2_shape("hat", 2.0), SMALL)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
