import numpy as np
import pytest

from ambitclt.levy import CharacteristicQuadruplet, LevyMeasure, MixingLaw, make_jump_law
from ambitclt.kernels import MSTOUKernel


@pytest.fixture
def gaussian_basis():
    return CharacteristicQuadruplet(0.0, 1.0)


@pytest.fixture
def normal_jump_basis():
    """Centred compound Poisson basis with N(0, 1) jumps at rate 1 (Sigma_Lambda = 1)."""
    return CharacteristicQuadruplet(0.0, 0.0, LevyMeasure(make_jump_law("normal", {"mean": 0, "std": 1}), 1.0))


@pytest.fixture
def mstou_gamma5():
    return MSTOUKernel(1.0, 1, MixingLaw.gamma(5, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion and assert it."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
