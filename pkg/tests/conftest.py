import numpy as np
import pytest

from pdmicro import units
from pdmicro.green import SourceKind, SourceModel

# Reference scenario used throughout: 400 V/m field, 200 ueV electrons,
# detector 0.5 m below the source.
FIELD_R1 = 400.0
E_R1_UEV = 200.0
D_R1 = 0.5


@pytest.fixture(scope="session")
def scales():
    return units.make_scales(FIELD_R1)


@pytest.fixture(scope="session")
def E_r1(scales):
    return units.convert_energy(E_R1_UEV, "ueV", "J")


@pytest.fixture(scope="session")
def s_wave():
    return SourceModel(SourceKind.S_WAVE, 1.0)


@pytest.fixture(scope="session")
def pz_dipole():
    return SourceModel(SourceKind.PZ_DIPOLE, 1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
