import math

import numpy as np
import pytest

from symcost.states import TestEnsemble

TestEnsemble.__test__ = False  # domain class, not a test case

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.diag([1.0, -1.0]).astype(np.complex128)
HADAMARD = (PAULI_X + PAULI_Z) / math.sqrt(2.0)

KET_PLUS = np.array([1, 1], dtype=np.complex128) / math.sqrt(2.0)
KET_MINUS = np.array([1, -1], dtype=np.complex128) / math.sqrt(2.0)


def proj(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.complex128)
    return np.outer(v, v.conj())


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
