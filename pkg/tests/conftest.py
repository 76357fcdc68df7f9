import numpy as np
import pytest

from stabilizer import SystemDef, build_cnot_system

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


@pytest.fixture(scope="session")
def cnot_exp():
    return build_cnot_system()


@pytest.fixture
def su2_pair():
    """Two generators only: closes on su(2), rank 3, not all of u(2)."""
    return SystemDef((-1j * SX, -1j * SY))


@pytest.fixture
def u2_triple():
    """x/y rotations plus the identity direction: all of u(2), rank 4."""
    return SystemDef((-1j * SX, -1j * SY, -1j * I2))


@pytest.fixture
def phase_system():
    """n = 1 toy: a single phase, S = diag(i)."""
    return SystemDef((np.array([[1j]]),))
