import math

import numpy as np
from hypothesis import given, settings, strategies as st

from symcost.channels import apply, channel_of, is_covariant
from symcost.fisher import qfi_limit_check, sld_qfi, variance
from symcost.rand import (
    generator,
    random_conserving_implementation,
    random_density,
    random_hermitian,
    random_pure,
)
from symcost.states import DensityMatrix, gibbs_state

from conftest import KET_PLUS, PAULI_Z, proj


class TestClosedForm:
    def test_commuting_gives_zero(self, rng):
        x = random_hermitian(3, rng)
        w, v = np.linalg.eigh(x)
        rho = (v * np.array([0.5, 0.3, 0.2])) @ v.conj().T
        assert sld_qfi(rho, x) < 1e-10
        assert sld_qfi(np.eye(2) / 2, PAULI_Z) < 1e-12

    def test_pure_plus_state(self):
        assert abs(sld_qfi(proj(KET_PLUS), PAULI_Z) - 4.0) < 1e-9

    def test_mixed_qubit_hand_value(self):
        x_pauli = np.array([[0, 1], [1, 0]], dtype=complex)
        rho = (np.eye(2) + 0.5 * x_pauli) / 2
        assert abs(sld_qfi(rho, PAULI_Z) - 1.0) < 1e-10


class TestLimitOracle:
    def test_commuting_zero_at_every_eps(self):
        assert qfi_limit_check(np.eye(2) / 2, PAULI_Z) < 1e-9

    def test_pure_plus_state(self):
        got = qfi_limit_check(proj(KET_PLUS), PAULI_Z)
        assert abs(got - 4.0) < 4e-3

    def test_matches_closed_form_full_rank(self, rng):
        for _ in range(5):
            rho = random_density(3, rng)
            x = random_hermitian(3, rng)
            closed = sld_qfi(rho.matrix, x)
            limit = qfi_limit_check(rho.matrix, x)
            assert abs(limit - closed) <= 1e-3 * max(1.0, closed)


class TestVariance:
    def test_eigenstate_is_deterministic(self):
        assert variance(np.diag([1.0, 0.0]), PAULI_Z) < 1e-12

    def test_plus_state(self):
        assert abs(variance(proj(KET_PLUS), PAULI_Z) - 1.0) < 1e-12

    def test_gibbs_qubit(self):
        g = gibbs_state(PAULI_Z, 1.0)
        assert abs(variance(g.matrix, PAULI_Z) - (1 - math.tanh(1.0) ** 2)) < 1e-10

    def test_pure_state_qfi_is_four_variance(self, rng):
        for _ in range(20):
            psi = random_pure(3, rng)
            x = random_hermitian(3, rng)
            assert abs(sld_qfi(psi.matrix, x) - 4 * variance(psi.matrix, x)) < 1e-9


class TestInvariants:
    @given(st.floats(min_value=-10, max_value=10))
    @settings(max_examples=20, deadline=None)
    def test_shift_invariance(self, c):
        rng = generator(77)
        rho = random_density(3, rng)
        x = random_hermitian(3, rng)
        base = sld_qfi(rho.matrix, x)
        assert abs(sld_qfi(rho.matrix, x + c * np.eye(3)) - base) < 1e-9 * max(1.0, base)

    def test_additivity(self, rng):
        for _ in range(10):
            rho, sigma = random_density(2, rng), random_density(3, rng)
            x, y = random_hermitian(2, rng), random_hermitian(3, rng)
            joint = np.kron(x, np.eye(3)) + np.kron(np.eye(2), y)
            total = sld_qfi(np.kron(rho.matrix, sigma.matrix), joint)
            parts = sld_qfi(rho.matrix, x) + sld_qfi(sigma.matrix, y)
            assert abs(total - parts) < 1e-8 * max(1.0, parts)

    def test_upper_bounded_by_four_variance(self, rng):
        for _ in range(30):
            rho = random_density(3, rng)
            x = random_hermitian(3, rng)
            assert sld_qfi(rho.matrix, x) <= 4 * variance(rho.matrix, x) + 1e-8

    def test_monotone_under_covariant_channels(self, rng):
        for trial in range(10):
            impl = random_conserving_implementation(2, 3, generator([5, trial]),
                                                    env_state="diagonal")
            ch = channel_of(impl)
            ok, dev = is_covariant(ch, impl.x_sys, impl.x_sys_out)
            assert ok, f"construction should be covariant, deviation {dev}"
            rho = random_density(2, rng)
            before = sld_qfi(rho.matrix, impl.x_sys)
            after = sld_qfi(apply(ch, rho.matrix), impl.x_sys_out)
            assert after <= before + 1e-7
