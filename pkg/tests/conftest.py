import numpy as np
import pytest

from projcells import LorentzCone, load_example
from projcells.decomp import epstein_penner
from projcells.deform import triangulate_base


@pytest.fixture(scope="session")
def torus_rep():
    return load_example("modular_torus")


@pytest.fixture(scope="session")
def fig8_rep():
    return load_example("figure_eight")


@pytest.fixture(scope="session")
def torus_dec(torus_rep):
    return epstein_penner(torus_rep, LorentzCone(3), word_length=8)


@pytest.fixture(scope="session")
def fig8_dec(fig8_rep):
    return epstein_penner(fig8_rep, LorentzCone(4), word_length=8)


@pytest.fixture(scope="session")
def torus_base(torus_dec):
    return triangulate_base(torus_dec)


@pytest.fixture(scope="session")
def fig8_base(fig8_dec):
    return triangulate_base(fig8_dec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
