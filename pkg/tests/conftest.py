import numpy as np
import pytest

from pvtrain.imageio import desk_pair
from pvtrain.trainer import TrainingPair


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def desk():
    """32x32 disk with sigma = 0.1 Philox(0) noise."""
    clean, noisy = desk_pair(32, 0.1, 0)
    return TrainingPair(clean, noisy)


@pytest.fixture(scope="session")
def small_desk():
    clean, noisy = desk_pair(16, 0.1, 1)
    return TrainingPair(clean, noisy)


def random_spec(rng, d=1, scale=1.0):
    from pvtrain.operator import OperatorSpec

    return OperatorSpec(tuple(scale * rng.standard_normal((2**h, 2**h)) for h in range(1, d + 1)))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 14):
        if number in module.RESULTS:
            ok, detail = module.RESULTS[number]
            terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {number:2d}: FAIL  not run")
