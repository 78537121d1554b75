import math

import numpy as np
import pytest

from symcost.channels import (
    Implementation,
    apply,
    channel_of,
    constant_channel,
    dephasing_channel,
    identity_channel,
    unitary_channel,
)
from symcost.fisher import sld_qfi
from symcost.rand import (
    generator,
    haar_unitary,
    random_conserving_implementation,
    random_density,
    random_hermitian,
    random_kraus_channel,
    random_orthogonal_pure_ensemble,
    random_pure,
    random_thermal_implementation,
    random_violated_implementation,
)
from symcost.recovery import helstrom_measurement, optimize_recovery, recovery_error
from symcost.states import (
    DensityMatrix,
    TestEnsemble,
    basis_state,
    gibbs_state,
    purified_distance,
)
from symcost.tradeoff import (
    CostBound,
    TradeoffViolation,
    charge_change_operator,
    check_entropy_production_bound,
    check_tradeoff_inequality,
    check_uncertainty_relation,
    coherence_cost_lower_bound,
    coherence_numerator,
    entropy_production_beta,
    fluctuation_denominator_direct,
    fluctuation_denominator_dual,
    fluctuation_denominator_split,
    fluctuation_denominator_spread,
    generalized_entropy_production,
    operator_conversion_bound,
    petz_error,
    petz_map,
)

from conftest import HADAMARD, KET_MINUS, KET_PLUS, PAULI_X, PAULI_Y, PAULI_Z, proj

INV_SQRT2 = 1 / math.sqrt(2)
LN2 = math.log(2.0)


def plus_minus_ensemble() -> TestEnsemble:
    return TestEnsemble((0.5, 0.5),
                        (DensityMatrix(proj(KET_PLUS)), DensityMatrix(proj(KET_MINUS))))


def swap_plus_implementation() -> Implementation:
    swap = np.zeros((4, 4), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            swap[j * 2 + i, i * 2 + j] = 1.0
    return Implementation(u=swap, env_state=DensityMatrix(proj(KET_PLUS)),
                          x_sys=PAULI_Z, x_env=PAULI_Z,
                          x_sys_out=PAULI_Z, x_env_out=PAULI_Z, dims=(2, 2, 2, 2))


class TestChargeChange:
    def test_identity_channel(self):
        y = charge_change_operator(identity_channel(2), PAULI_Z, PAULI_Z)
        assert np.allclose(y, 0)

    def test_constant_channel(self, rng):
        sigma = random_density(2, rng)
        y = charge_change_operator(constant_channel(sigma, 2), PAULI_Z, PAULI_Z)
        expected = PAULI_Z - np.trace(sigma.matrix @ PAULI_Z).real * np.eye(2)
        assert np.allclose(y, expected, atol=1e-12)

    def test_dephasing_kills_offdiagonal_charge(self):
        y = charge_change_operator(dephasing_channel(PAULI_Z), PAULI_X, PAULI_X)
        assert np.allclose(y, PAULI_X)

    def test_shift_rule(self, rng):
        ch = random_kraus_channel(2, 2, 2, rng)
        a, b = 1.3, -0.4
        base = charge_change_operator(ch, PAULI_Z, PAULI_X)
        shifted = charge_change_operator(ch, PAULI_Z + a * np.eye(2), PAULI_X + b * np.eye(2))
        assert np.allclose(shifted, base + (a - b) * np.eye(2), atol=1e-10)


class TestCoherenceNumerator:
    def test_identity_charge_change_gives_zero(self, rng):
        ens = random_orthogonal_pure_ensemble(2, 2, rng)
        assert coherence_numerator(ens, 2.7 * np.eye(2)) < 1e-7

    def test_plus_minus_with_z(self):
        assert abs(coherence_numerator(plus_minus_ensemble(), PAULI_Z) - INV_SQRT2) < 1e-10

    def test_identical_states_give_zero(self, rng):
        rho = random_density(2, rng)
        ens = TestEnsemble((0.5, 0.5), (rho, rho))
        assert coherence_numerator(ens, random_hermitian(2, rng)) < 1e-9

    def test_orthogonal_pure_form_matches_matrix_elements(self, rng):
        # for orthogonal pure states the numerator collapses to the summed
        # squared matrix elements of the charge change
        for _ in range(10):
            ens = random_orthogonal_pure_ensemble(3, 3, rng)
            y = random_hermitian(3, rng)
            vecs = []
            for s in ens.states:
                w, v = np.linalg.eigh(s.matrix)
                vecs.append(v[:, -1])
            total = 0.0
            for k in range(3):
                for kp in range(3):
                    if k != kp:
                        el = vecs[k].conj() @ y @ vecs[kp]
                        total += ens.weights[k] * ens.weights[kp] * abs(el) ** 2
            assert abs(coherence_numerator(ens, y) - math.sqrt(total)) < 1e-9


class TestFluctuationDenominators:
    def test_spread_qubit_z(self):
        assert abs(fluctuation_denominator_spread(PAULI_Z, PAULI_Z) - 4.0) < 1e-12

    def test_direct_vanishes_for_trivial_transfer(self, rng):
        rho_b = random_density(3, rng)
        impl = Implementation(u=np.eye(6), env_state=rho_b,
                              x_sys=PAULI_Z, x_env=np.zeros((3, 3)),
                              x_sys_out=PAULI_Z, x_env_out=np.zeros((3, 3)),
                              dims=(2, 3, 2, 3))
        ens = random_orthogonal_pure_ensemble(2, 2, rng)
        assert fluctuation_denominator_direct(ens, impl, budget=(4, 100)) < 1e-8

    def test_dual_value_for_dephasing(self):
        # spread of the surviving charge change is 2; the dual variance term
        # contributes 2 * sqrt(||I - 0||) = 2
        ch = dephasing_channel(PAULI_Z)
        assert abs(fluctuation_denominator_dual(ch, PAULI_X, PAULI_X) - 4.0) < 1e-10

    def test_ordering_chain(self):
        for trial in range(15):
            rng = generator([41, trial])
            d_s = int(rng.integers(2, 4))
            impl = random_conserving_implementation(d_s, int(rng.integers(2, 5)), rng)
            ens = random_orthogonal_pure_ensemble(d_s, 2, rng)
            ch = channel_of(impl)
            d1 = fluctuation_denominator_spread(impl.x_sys, impl.x_sys_out)
            d2 = fluctuation_denominator_dual(ch, impl.x_sys, impl.x_sys_out)
            d3 = fluctuation_denominator_split(ens, impl, seed=trial)
            dd = fluctuation_denominator_direct(ens, impl, budget=(6, 150), seed=trial)
            assert dd <= d1 + 1e-7
            assert d3 <= d2 + 1e-7

    def test_shift_invariance_of_scales(self):
        rng = generator(55)
        impl = random_conserving_implementation(2, 3, rng)
        ens = random_orthogonal_pure_ensemble(2, 2, rng)
        ch = channel_of(impl)
        y = charge_change_operator(ch, impl.x_sys, impl.x_sys_out)
        base = {
            "c": coherence_numerator(ens, y),
            "d1": fluctuation_denominator_spread(impl.x_sys, impl.x_sys_out),
            "d2": fluctuation_denominator_dual(ch, impl.x_sys, impl.x_sys_out),
            "d3": fluctuation_denominator_split(ens, impl, seed=9),
            "dd": fluctuation_denominator_direct(ens, impl, budget=(8, 150), seed=9),
        }
        for a, b in ((2.1, -0.7), (-3.0, 3.0)):
            shifted = Implementation(
                u=impl.u, env_state=impl.env_state,
                x_sys=impl.x_sys + a * np.eye(2), x_env=impl.x_env,
                x_sys_out=impl.x_sys_out + b * np.eye(2), x_env_out=impl.x_env_out,
                dims=impl.dims)
            ch_s = channel_of(shifted)
            y_s = charge_change_operator(ch_s, shifted.x_sys, shifted.x_sys_out)
            assert abs(coherence_numerator(ens, y_s) - base["c"]) < 1e-8
            assert abs(fluctuation_denominator_spread(shifted.x_sys, shifted.x_sys_out)
                       - base["d1"]) < 1e-8
            assert abs(fluctuation_denominator_dual(ch_s, shifted.x_sys, shifted.x_sys_out)
                       - base["d2"]) < 1e-8
            assert abs(fluctuation_denominator_split(ens, shifted, seed=9) - base["d3"]) < 1e-6
            assert abs(fluctuation_denominator_direct(ens, shifted, budget=(8, 150), seed=9)
                       - base["dd"]) < 1e-6


class TestMainInequality:
    def test_zero_numerator_is_vacuous(self, rng):
        imp = Implementation(u=np.eye(4), env_state=basis_state(2, 0),
                             x_sys=PAULI_Z, x_env=np.zeros((2, 2)),
                             x_sys_out=PAULI_Z, x_env_out=np.zeros((2, 2)),
                             dims=(2, 2, 2, 2))
        ens = TestEnsemble((0.5, 0.5), (basis_state(2, 0), basis_state(2, 1)))
        report = check_tradeoff_inequality(ens, imp, delta_irrev=0.0, include_direct=False)
        assert report.lhs == 0.0 and report.slack >= 0.0

    def test_swap_plus_pipeline(self):
        impl = swap_plus_implementation()
        ens = plus_minus_ensemble()
        opt = optimize_recovery(ens, channel_of(impl), seed=8)
        report = check_tradeoff_inequality(ens, impl, opt.delta_upper,
                                           delta_irrev_T=opt.delta_t, seed=8)
        assert abs(report.c_value - INV_SQRT2) < 1e-9
        assert abs(report.fisher_B - 4.0) < 1e-8
        assert abs(report.delta_1 - 4.0) < 1e-12
        assert abs(report.delta_irrev - INV_SQRT2) < 1e-4
        assert report.tight_variant_used
        assert report.slack >= 0.0

    @pytest.mark.parametrize("variant", ["orthogonal", "general"])
    def test_monte_carlo_never_violated(self, variant):
        for trial in range(12):
            rng = generator([61, trial])
            d_s, d_e = int(rng.integers(2, 4)), int(rng.integers(2, 5))
            impl = random_conserving_implementation(d_s, d_e, rng)
            if variant == "orthogonal":
                ens = random_orthogonal_pure_ensemble(d_s, 2, rng)
            else:
                from symcost.rand import random_mixed_ensemble

                ens = random_mixed_ensemble(d_s, 2, rng)
            opt = optimize_recovery(ens, channel_of(impl), seed=trial)
            for choice in ("d1", "d2", "d3"):
                report = check_tradeoff_inequality(
                    ens, impl, opt.delta_upper, variant=variant, delta_choice=choice,
                    delta_irrev_T=opt.delta_t, seed=trial, include_direct=False)
                assert report.slack >= -1e-7

    def test_orthogonality_precondition(self, rng):
        impl = random_conserving_implementation(2, 2, rng)
        ens = TestEnsemble((0.5, 0.5), (random_density(2, rng), random_density(2, rng)))
        with pytest.raises(ValueError, match="orthogonal"):
            check_tradeoff_inequality(ens, impl, 0.5)

    def test_violated_conservation_clamps_to_zero(self):
        rng = generator(71)
        impl = random_violated_implementation(2, 3, rng, violation_spread=3.0)
        ens = random_orthogonal_pure_ensemble(2, 2, rng)
        opt = optimize_recovery(ens, channel_of(impl), seed=1)
        report = check_tradeoff_inequality(ens, impl, opt.delta_upper, seed=1,
                                           include_direct=False)
        assert report.delta_Z > 2 * report.c_value
        assert report.lhs == 0.0

    def test_violation_adjusted_inequality_holds(self):
        for trial in range(8):
            rng = generator([81, trial])
            impl = random_violated_implementation(
                2, 3, rng, violation_spread=float(rng.uniform(0.1, 1.0)))
            ens = random_orthogonal_pure_ensemble(2, 2, rng)
            opt = optimize_recovery(ens, channel_of(impl), seed=trial)
            report = check_tradeoff_inequality(ens, impl, opt.delta_upper, seed=trial,
                                               delta_irrev_T=opt.delta_t,
                                               include_direct=False)
            assert report.delta_Z > 1e-3
            assert report.slack >= -1e-7


class TestUncertaintyRelation:
    def test_commuting_observables(self, rng):
        rho = random_density(2, rng)
        lhs, _, slack = check_uncertainty_relation(rho.matrix, PAULI_Z, PAULI_Z)
        assert lhs < 1e-12 and slack >= 0

    def test_ground_state_z_x(self):
        lhs, rhs, _ = check_uncertainty_relation(np.diag([1.0, 0.0]), PAULI_Z, PAULI_X)
        assert lhs < 1e-12 and rhs < 1e-6

    def test_saturation_on_y_eigenstate(self):
        plus_i = np.array([1, 1j], dtype=complex) / math.sqrt(2)
        lhs, rhs, slack = check_uncertainty_relation(proj(plus_i), PAULI_Z, PAULI_X)
        assert abs(lhs - 2.0) < 1e-12
        assert abs(rhs - 2.0) < 1e-9
        assert abs(slack) < 1e-9

    def test_never_violated_on_random_triples(self):
        rng = generator(91)
        for _ in range(100):
            dim = int(rng.integers(2, 5))
            rho = random_density(dim, rng)
            _, _, slack = check_uncertainty_relation(
                rho.matrix, random_hermitian(dim, rng), random_hermitian(dim, rng))
            assert slack >= -1e-9


class TestOperatorConversion:
    def test_exact_classical_conversion(self):
        impl = Implementation(u=np.eye(4), env_state=basis_state(2, 0),
                              x_sys=PAULI_Z, x_env=np.zeros((2, 2)),
                              x_sys_out=PAULI_Z, x_env_out=np.zeros((2, 2)),
                              dims=(2, 2, 2, 2))
        q = np.diag([1.0, 0.0]).astype(complex)
        eps, bound, slack = operator_conversion_bound(q, q, basis_state(2, 0), impl)
        assert eps < 1e-9 and bound < 1e-9 and slack >= -1e-9

    def test_zero_commutator_expectation(self, rng):
        impl = random_conserving_implementation(2, 3, rng)
        # Q commuting with everything relevant: trivial projector
        q = np.eye(2, dtype=complex)
        p = np.eye(2, dtype=complex)
        eps, bound, _ = operator_conversion_bound(q, p, random_density(2, rng), impl)
        assert bound < 1e-9

    def test_monte_carlo_qubit_qutrit(self):
        for trial in range(10):
            rng = generator([101, trial])
            impl = random_conserving_implementation(2, 3, rng)
            rho_s = random_density(2, rng)
            q = proj(KET_PLUS)
            h0, h1 = random_density(2, rng), random_density(2, rng)
            p, _ = helstrom_measurement(h0.matrix, h1.matrix, 0.5)
            eps, bound, slack = operator_conversion_bound(q, p, rho_s, impl)
            assert slack >= -1e-7

    def test_validates_projector(self, rng):
        impl = random_conserving_implementation(2, 2, rng)
        with pytest.raises(ValueError, match="projector"):
            operator_conversion_bound(0.5 * np.eye(2), np.eye(2),
                                      basis_state(2, 0), impl)


class TestPetzAndEntropy:
    def test_identity_channel_zero_error(self, rng):
        sigma = random_density(2, rng)
        assert petz_error(identity_channel(2), sigma, random_density(2, rng).matrix) < 1e-7

    def test_dephasing_hand_value(self):
        err = petz_error(dephasing_channel(PAULI_Z), DensityMatrix(np.eye(2) / 2),
                         proj(KET_PLUS))
        assert abs(err - INV_SQRT2) < 1e-6

    def test_unitary_channel_reversed(self, rng):
        u = haar_unitary(3, rng)
        err = petz_error(unitary_channel(u), random_density(3, rng),
                         random_density(3, rng).matrix)
        assert err < 2e-6  # purified distance amplifies fidelity roundoff

    def test_recovery_chain_on_random_triples(self):
        for trial in range(30):
            rng = generator([111, trial])
            fwd = random_kraus_channel(2, 2, 2, rng)
            sigma = random_density(2, rng)
            rho = random_density(2, rng)
            rec = petz_map(fwd, sigma)
            back = apply(rec, apply(fwd, sigma.matrix))
            assert np.linalg.norm(back - sigma.matrix) < 1e-8
            d_p = petz_error(fwd, sigma, rho.matrix)
            production = generalized_entropy_production(fwd, rho.matrix, sigma.matrix)
            log_bound = -math.log(1.0 - min(d_p, 1 - 1e-15) ** 2)
            assert production >= log_bound - 1e-7
            assert log_bound >= d_p**2 - 1e-12

    def test_petz_bounds_ensemble_error(self):
        # the two-state ensemble error is at most the Petz error over sqrt(2)
        for trial in range(10):
            rng = generator([121, trial])
            fwd = random_kraus_channel(2, 2, 2, rng)
            sigma = random_density(2, rng)
            rho = random_density(2, rng)
            ens = TestEnsemble((0.5, 0.5), (rho, sigma))
            opt = optimize_recovery(ens, fwd, seed=trial)
            d_p = petz_error(fwd, sigma, rho.matrix)
            assert opt.delta_upper <= d_p / math.sqrt(2) + 1e-6

    def test_generalized_production_nonnegative(self):
        rng = generator(131)
        for _ in range(100):
            fwd = random_kraus_channel(2, 2, 2, rng)
            rho, sigma = random_density(2, rng), random_density(2, rng)
            assert generalized_entropy_production(fwd, rho.matrix, sigma.matrix) >= -1e-9


class TestEntropyProductionBound:
    def dephasing_impl(self) -> Implementation:
        cnot = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
        return Implementation(u=cnot, env_state=basis_state(2, 0),
                              x_sys=PAULI_Z, x_env=np.zeros((2, 2)),
                              x_sys_out=PAULI_Z, x_env_out=np.zeros((2, 2)),
                              dims=(2, 2, 2, 2))

    def test_worked_example_values(self):
        impl = self.dephasing_impl()
        fwd = channel_of(impl)
        sigma_beta = entropy_production_beta(fwd, proj(KET_PLUS), PAULI_Z, 1.0)
        assert abs(sigma_beta - LN2) < 1e-10  # entropy gain ln 2, zero heat
        report = check_entropy_production_bound(
            impl, DensityMatrix(proj(KET_PLUS)), PAULI_Z, 1.0, seed=3)
        assert report.slack >= 0.0
        assert 2 * report.delta_irrev**2 <= sigma_beta + 1e-9
        assert report.delta_irrev <= 0.5 + 1e-6  # Petz-seeded upper bound

    def test_identity_channel_zero_production(self, rng):
        impl = Implementation(u=np.eye(4), env_state=basis_state(2, 0),
                              x_sys=PAULI_Z, x_env=np.zeros((2, 2)),
                              x_sys_out=PAULI_Z, x_env_out=np.zeros((2, 2)),
                              dims=(2, 2, 2, 2))
        got = entropy_production_beta(channel_of(impl), random_density(2, rng).matrix,
                                      PAULI_Z, 1.0)
        assert abs(got) < 1e-10

    def test_gibbs_input_is_trivial(self):
        impl = self.dephasing_impl()
        report = check_entropy_production_bound(impl, gibbs_state(PAULI_Z, 1.0),
                                                PAULI_Z, 1.0, seed=5)
        assert report.c_value < 1e-9 and report.lhs < 1e-12

    def test_non_gibbs_preserving_rejected(self, rng):
        impl = swap_plus_implementation()
        with pytest.raises(ValueError, match="Gibbs"):
            check_entropy_production_bound(impl, random_pure(2, rng), PAULI_Z, 1.0)

    def test_seeded_thermal_implementations(self):
        for trial in range(6):
            rng = generator([141, trial])
            impl = random_thermal_implementation(2, 3, 0.8, rng)
            rho = random_pure(2, rng)
            report = check_entropy_production_bound(impl, rho, impl.x_sys, 0.8,
                                                    seed=trial)
            assert report.slack >= -1e-7


class TestCoherenceCost:
    def test_covariant_channel_costs_nothing(self, rng):
        ch = dephasing_channel(PAULI_Z)
        ens = TestEnsemble((0.5, 0.5), (basis_state(2, 0), basis_state(2, 1)))
        opt = optimize_recovery(ens, ch, seed=1)
        bound = coherence_cost_lower_bound(ens, ch, PAULI_Z, PAULI_Z, opt.delta_upper)
        assert not bound.unbounded and bound.value == 0.0

    def test_nogo_regime_returns_marker(self):
        # dephasing in a rotated basis fixes the rotated states exactly, so
        # the recovery error vanishes while the numerator stays finite
        rotated = HADAMARD @ PAULI_Z @ HADAMARD.conj().T  # = pauli X
        ch = dephasing_channel(rotated)
        plus = DensityMatrix(proj(KET_PLUS))
        minus = DensityMatrix(proj(KET_MINUS))
        ens = TestEnsemble((0.5, 0.5), (plus, minus))
        y = charge_change_operator(ch, PAULI_Z, PAULI_Z)
        assert coherence_numerator(ens, y) > 0.1
        bound = coherence_cost_lower_bound(ens, ch, PAULI_Z, PAULI_Z, delta_irrev=0.0)
        assert bound.unbounded

    def test_swap_scenario_consistent_with_environment(self):
        impl = swap_plus_implementation()
        ch = channel_of(impl)
        ens = plus_minus_ensemble()
        opt = optimize_recovery(ens, ch, seed=2)
        bound = coherence_cost_lower_bound(ens, ch, PAULI_Z, PAULI_Z, opt.delta_upper)
        fisher_env = sld_qfi(impl.env_state.matrix, impl.x_env)
        assert bound.value <= fisher_env + 1e-6

    def test_requires_orthogonal_ensemble(self, rng):
        ens = TestEnsemble((0.5, 0.5), (random_density(2, rng), random_density(2, rng)))
        with pytest.raises(ValueError, match="orthogonal"):
            coherence_cost_lower_bound(ens, identity_channel(2), PAULI_Z, PAULI_Z, 0.5)
