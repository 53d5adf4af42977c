import math

import numpy as np
import pytest

from countbench import adversary, johnson, linalg
from countbench.adversary import ProblemInstance

SWEEP = [(6, 1, 2), (7, 1, 2), (8, 2, 3), (9, 2, 3), (10, 2, 3), (10, 3, 4),
         (12, 2, 4), (12, 3, 4)]


class TestProblemInstance:
    def test_eps_and_regime(self):
        inst = ProblemInstance(8, 2, 3)
        assert inst.eps == pytest.approx(0.5)
        assert not inst.theorem_regime  # n < 5k' scale, eps fine but n=8 < 10
        assert ProblemInstance(1000, 100, 110).theorem_regime

    def test_from_eps(self):
        assert ProblemInstance.from_eps(8, 2, 0.5) == ProblemInstance(8, 2, 3)
        with pytest.raises(ValueError):
            ProblemInstance.from_eps(20, 3, 0.5)  # 4.5 not an integer

    def test_validation(self):
        with pytest.raises(ValueError):
            ProblemInstance(8, 3, 2)
        with pytest.raises(ValueError):
            ProblemInstance(6, 2, 3)  # n < 2k'+1
        with pytest.raises(ValueError):
            ProblemInstance(8, 0, 2)

    def test_degenerate_equal_sizes_allowed_for_closed_forms(self):
        inst = ProblemInstance(8, 3, 3)
        assert inst.eps == 0.0


class TestPhiTable:
    def test_block_zero_closed_form(self):
        table = adversary.phi_table(ProblemInstance(8, 2, 3))
        assert np.allclose(
            table.phi[0], [0.0, 0.5, 0.0, math.sqrt(6.0 / 8.0)], atol=1e-12
        )

    def test_component_one_is_sqrt_k_over_n(self):
        table = adversary.phi_table(ProblemInstance(8, 2, 3))
        assert table.phi[1, 1] == pytest.approx(0.5, abs=1e-15)

    def test_top_block_unit_norm(self):
        table = adversary.phi_table(ProblemInstance(8, 2, 3))
        assert np.linalg.norm(table.phi[2]) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n,k,kp", SWEEP)
    def test_unit_norm_claim_across_sweep(self, n, k, kp):
        table = adversary.phi_table(ProblemInstance(n, k, kp))
        assert table.unit_norm_error() <= 1e-12

    def test_zero_entries_at_block_zero(self):
        table = adversary.phi_table(ProblemInstance(10, 3, 4))
        assert table.phi[0, 0] == 0.0 and table.phi_prime[0, 0] == 0.0
        assert table.phi[0, 2] == 0.0 and table.phi_prime[0, 2] == 0.0


class TestGammaSchedule:
    def test_t_one_is_indicator(self):
        sched = adversary.gamma_schedule(1.0, 4)
        assert np.allclose(sched.gammas, [1.0, 0.0, 0.0, 0.0, 0.0])

    def test_t_two(self):
        sched = adversary.gamma_schedule(2.0, 5)
        assert np.allclose(sched.gammas, [1.0, 0.5, 0.0, 0.0, 0.0, 0.0])

    def test_t_equals_k(self):
        k = 6
        sched = adversary.gamma_schedule(float(k), k)
        assert np.allclose(sched.gammas, 1.0 - np.arange(k + 1) / k)
        assert np.all(np.diff(sched.gammas) < 0)

    def test_out_of_range_reads_zero(self):
        sched = adversary.gamma_schedule(10.0, 2)
        assert sched.gamma(3) == 0.0  # by convention, even though 1 - 3/10 > 0
        assert sched.gamma(-1) == 0.0

    def test_rejects_small_t(self):
        with pytest.raises(ValueError):
            adversary.gamma_schedule(0.5, 3)

    def test_tilde_boundary_conventions(self):
        inst = ProblemInstance(8, 2, 3)
        table = adversary.phi_table(inst)
        # Large t: every in-range weight is positive, yet the top row's last
        # entry must still read the forced zero weight past the block range.
        sched = adversary.gamma_schedule(100.0, inst.k)
        tilde, tilde_prime = adversary.tilde_tables(sched, table)
        assert tilde[0, 0] == 0.0 and tilde_prime[0, 0] == 0.0
        assert tilde[inst.k, 3] == 0.0 and tilde_prime[inst.k, 3] == 0.0
        assert np.all(tilde[1 : inst.k + 1, :3] > 0.0)


class TestAssembly:
    def test_t_one_gives_constant_matrix(self):
        inst = ProblemInstance(8, 2, 3)
        gamma = adversary.adversary_matrix(inst, 1.0)
        expected = 1.0 / math.sqrt(math.comb(8, 2) * math.comb(8, 3))
        assert np.allclose(gamma, expected, atol=1e-12)

    @pytest.mark.parametrize("t", [1.0, 2.0, 3.0])
    def test_spectral_norm_is_top_weight(self, t):
        inst = ProblemInstance(8, 2, 3)
        assert linalg.spectral_norm(adversary.adversary_matrix(inst, t)) == (
            pytest.approx(1.0, abs=1e-9)
        )

    def test_projection_recovers_weight(self):
        inst = ProblemInstance(8, 2, 3)
        gamma = adversary.adversary_matrix(inst, 2.0)
        phi_1 = johnson.transporter(8, 2, 3, 1)
        d_1 = johnson.irrep_projectors(8, 2).dimension(1)
        assert float(np.sum(phi_1.matrix * gamma)) / d_1 == pytest.approx(0.5, abs=1e-9)

    def test_dimension_mismatch_rejected(self):
        sched = adversary.gamma_schedule(2.0, 2)
        transporters = [johnson.transporter(8, 2, 3, j) for j in range(2)]
        with pytest.raises(ValueError):
            adversary.assemble_adversary(sched, transporters)


class TestHadamardStep:
    def test_tridiagonal_support(self):
        inst = ProblemInstance(10, 3, 4)
        for j in range(4):
            basis_vec = np.zeros(4)
            basis_vec[j] = 1.0
            out = adversary.hadamard_psi_step(basis_vec, inst)
            support = {i for i, c in enumerate(out) if abs(c) > 1e-15}
            assert support <= {j - 1, j, j + 1}

    def test_symmetric_forms_agree(self):
        inst = ProblemInstance(8, 2, 3)
        sched = adversary.gamma_schedule(2.0, 2)
        table = adversary.phi_table(inst)
        tilde, tilde_prime = adversary.tilde_tables(sched, table)
        for j in range(3):
            left = float(table.phi[j] @ tilde_prime[j])
            right = float(table.phi_prime[j] @ tilde[j])
            assert left == pytest.approx(right, abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adversary.hadamard_psi_step([1.0, 0.0], ProblemInstance(8, 2, 3))


class TestOverlap:
    def test_degenerate_instance_has_unit_overlap(self):
        inst = ProblemInstance(8, 3, 3)
        for j in range(4):
            assert adversary.overlap_D(inst, j) == pytest.approx(1.0, abs=1e-12)

    def test_frozen_value_8_2_3(self):
        # By substitution: sqrt(2/8) sqrt(3/8) + sqrt(6/8) sqrt(5/8)
        # = (sqrt(6) + sqrt(30)) / 8.
        expected = (math.sqrt(6.0) + math.sqrt(30.0)) / 8.0
        assert adversary.overlap_D(ProblemInstance(8, 2, 3), 0) == pytest.approx(
            expected, abs=1e-14
        )

    @pytest.mark.parametrize("n,k,kp", SWEEP)
    def test_cauchy_schwarz(self, n, k, kp):
        inst = ProblemInstance(n, k, kp)
        for j in range(k + 1):
            assert adversary.overlap_D(inst, j) <= 1.0 + 1e-12


class TestPsiPowerBound:
    def test_empty_power(self):
        assert adversary.psi_power_lower_bound(ProblemInstance(8, 2, 3), 1.0, 0) == 0.5

    def test_two_step_value(self):
        inst = ProblemInstance(8, 2, 3)
        d = min(adversary.overlap_D(inst, j) for j in range(3))
        assert adversary.psi_power_lower_bound(inst, 4.0, 2) == pytest.approx(
            d**2 / 2.0
        )

    @pytest.mark.parametrize("ell", [1, 2, 3])
    def test_recurrence_iterate_dominates_bound(self, ell):
        inst = ProblemInstance(8, 2, 3)
        t = 2.0 * ell
        coeffs = adversary.gamma_schedule(t, inst.k).gammas
        for _ in range(ell):
            coeffs = adversary.hadamard_psi_step(coeffs, inst)
        bound = adversary.psi_power_lower_bound(inst, t, ell)
        assert float(np.max(np.abs(coeffs))) >= bound - 1e-12

    def test_requires_t_at_least_two_ell(self):
        with pytest.raises(ValueError):
            adversary.psi_power_lower_bound(ProblemInstance(8, 2, 3), 1.0, 1)


class TestDeltaNorms:
    def test_state_gen_symmetric_at_eps_zero(self):
        inst = ProblemInstance(8, 3, 3)
        sched = adversary.gamma_schedule(2.0, 3)
        forward, reverse = adversary.norm_delta_state_gen(sched, inst)
        assert forward == pytest.approx(reverse, abs=1e-14)
        assert forward > 0.0  # the 1/t weight offsets survive

    def test_state_gen_t_one_support(self):
        # With t = 1 only blocks 0 and 1 carry weight; truncating the table
        # beyond block 1 must not change the value.
        inst = ProblemInstance(10, 3, 4)
        sched = adversary.gamma_schedule(1.0, 3)
        table = adversary.phi_table(inst)
        tilde, tilde_prime = adversary.tilde_tables(sched, table)
        g = np.array([sched.gamma(j) for j in range(4)])[:, None]
        per_j = np.linalg.norm(tilde_prime - g * table.phi, axis=1)
        full, _ = adversary.norm_delta_state_gen(sched, inst)
        assert full == pytest.approx(float(np.max(per_j[:2])), abs=1e-14)

    def test_reflection_vanishes_at_eps_zero_large_t(self):
        inst = ProblemInstance(8, 3, 3)
        sched = adversary.gamma_schedule(1e6, 3)
        assert adversary.norm_delta_reflection(sched, inst) < 1e-5

    def test_reflection_t_one_explicit_blocks(self):
        inst = ProblemInstance(8, 2, 3)
        sched = adversary.gamma_schedule(1.0, 2)
        p = adversary.phi_components(8, 2, 0)
        q = adversary.phi_components(8, 3, 0)
        block0 = np.zeros((4, 4))
        block0[1, 1] = q[1] ** 2 - p[1] ** 2
        block0[1, 3] = -p[1] * p[3]
        block0[3, 1] = q[1] * q[3]
        p1 = adversary.phi_components(8, 2, 1)
        q1 = adversary.phi_components(8, 3, 1)
        block1 = np.zeros((4, 4))
        block1[0, 0] = q1[0] ** 2 - p1[0] ** 2
        block1[0, 1:] = -p1[0] * p1[1:]
        block1[1:, 0] = q1[0] * q1[1:]
        expected = max(
            np.linalg.svd(block0, compute_uv=False)[0],
            np.linalg.svd(block1, compute_uv=False)[0],
        )
        assert adversary.norm_delta_reflection(sched, inst) == pytest.approx(
            expected, abs=1e-14
        )

    def test_membership_t_one_frozen_value(self):
        inst = ProblemInstance(8, 2, 3)
        sched = adversary.gamma_schedule(1.0, 2)
        assert adversary.norm_delta_membership(sched, inst) == pytest.approx(
            math.sqrt(18.0) / 8.0, abs=1e-14
        )

    def test_membership_eps_zero_offsets(self):
        inst = ProblemInstance(9, 4, 4)
        sched = adversary.gamma_schedule(2.0, 4)
        n, k = 9, 4
        expected = max(
            math.sqrt((k - j) * (n - k - j))
            * abs(sched.gamma(j) - sched.gamma(j + 1))
            / (n - 2 * j)
            for j in range(k + 1)
        )
        assert adversary.norm_delta_membership(sched, inst) == pytest.approx(
            expected, abs=1e-14
        )

    @pytest.mark.parametrize("n,k,kp", SWEEP)
    def test_membership_monotone_in_t_within_support(self, n, k, kp):
        # Monotone decrease in t holds while the schedule support stays
        # inside the block range (t <= k); beyond that the top-block weight
        # 1 - k/t grows with t and its boundary branch takes over, e.g.
        # (8,2,3) gives 0.250 at t=4 but 0.375 at t=8.
        inst = ProblemInstance(n, k, kp)
        values = [
            adversary.norm_delta_membership(adversary.gamma_schedule(t, k), inst)
            for t in (1.0, 2.0, 4.0, 8.0)
            if t <= k
        ]
        for earlier, later in zip(values, values[1:]):
            assert later <= earlier + 1e-12

    @pytest.mark.parametrize("n,k,kp", [(50, 10, 12), (101, 20, 24), (80, 16, 18)])
    def test_membership_monotone_in_t_at_regime_scale(self, n, k, kp):
        inst = ProblemInstance(n, k, kp)
        values = [
            adversary.norm_delta_membership(adversary.gamma_schedule(t, k), inst)
            for t in (1.0, 2.0, 4.0, 8.0)
        ]
        for earlier, later in zip(values, values[1:]):
            assert later <= earlier + 1e-12

    @pytest.mark.parametrize("n,k,kp", SWEEP)
    def test_schedule_support_truncation(self, n, k, kp):
        # Blocks beyond t+1 contribute nothing to any of the four norms.
        inst = ProblemInstance(n, k, kp)
        for t in (1.0, 2.0):
            sched = adversary.gamma_schedule(t, k)
            table = adversary.phi_table(inst)
            tilde, tilde_prime = adversary.tilde_tables(sched, table)
            cut = int(t) + 2
            assert np.all(tilde[cut:] == 0.0) and np.all(tilde_prime[cut:] == 0.0)


class TestDualFeasibility:
    def test_trivial_point(self):
        report = adversary.dual_feasibility_report(ProblemInstance(8, 2, 3), 1.0, 0)
        assert report.gamma_norm == 1.0
        assert report.psi_power_bound == 0.5
        assert report.feasible

    def test_finite_positive_quantities(self):
        report = adversary.dual_feasibility_report(ProblemInstance(8, 2, 3), 2.0, 1)
        for value in (report.t1, report.t2, report.t3):
            assert 0.0 < value < math.inf
        assert report.membership_norm == pytest.approx(1.0 / report.t1)

    def test_threshold_flag(self):
        report = adversary.dual_feasibility_report(ProblemInstance(6, 1, 2), 6.0, 3)
        assert report.psi_power_bound < 0.25
        assert not report.feasible


class TestTheoremTradeoff:
    def test_hand_case_base(self):
        report = adversary.theorem_tradeoff(1e6, 1e4, 0.1, 0, 0)
        assert report.membership_bound == pytest.approx(100.0, rel=1e-12)
        assert report.copies_bound == pytest.approx(1000.0, rel=1e-12)
        assert report.state_generation_bound == pytest.approx(100.0, rel=1e-12)
        assert report.reflection_bound == pytest.approx(100.0, rel=1e-12)
        assert report.fifth_case_threshold == pytest.approx(10.0, rel=1e-12)
        assert report.fifth_case_reflection == pytest.approx(
            math.sqrt(1e5), rel=1e-12
        )
        assert report.t_choice == pytest.approx(2.0, rel=1e-12)
        assert report.regime_n and report.regime_eps

    def test_hand_case_small_eps(self):
        report = adversary.theorem_tradeoff(1e6, 1e4, 0.01, 0, 0)
        assert report.copies_bound == pytest.approx(1e4, rel=1e-12)
        assert report.state_generation_bound == pytest.approx(
            10 ** (8.0 / 3.0), rel=1e-12
        )
        assert report.membership_bound == pytest.approx(1000.0, rel=1e-12)
        assert report.t_choice == pytest.approx(20.0, rel=1e-12)

    def test_hand_case_with_copies(self):
        report = adversary.theorem_tradeoff(320, 64, 1.0, ell=2, ell_prime=3)
        assert report.copies_bound == pytest.approx(5.0, rel=1e-12)
        assert report.state_generation_bound == pytest.approx(
            math.sqrt(5.0), rel=1e-12
        )
        assert report.reflection_bound == pytest.approx(math.sqrt(5.0), rel=1e-12)
        assert report.fifth_case_reflection == pytest.approx(8.0, rel=1e-12)
        assert report.t_choice == pytest.approx(24.0, rel=1e-12)  # cprime * ell_prime

    def test_eps_one_copies_branch(self):
        report = adversary.theorem_tradeoff(100, 16, 1.0, 0, 0)
        assert report.copies_bound == pytest.approx(min(16.0, 4.0, 100.0 / 16.0))

    def test_dropped_terms_read_infinite(self):
        report = adversary.theorem_tradeoff(1e6, 1e4, 0.1, 0, 0)
        assert report.state_generation_terms["sqrt_k_over_ell_over_eps"] == math.inf
        assert report.reflection_terms["sqrt_k_over_copies_over_eps"] == math.inf
        payload = report.as_dict()
        assert payload["state_generation_terms"]["sqrt_k_over_ell_over_eps"] is None

    def test_usage_errors(self):
        with pytest.raises(ValueError):
            adversary.theorem_tradeoff(0, 10, 0.1)
        with pytest.raises(ValueError):
            adversary.theorem_tradeoff(100, 10, 0.0)
        with pytest.raises(ValueError):
            adversary.theorem_tradeoff(100, 10, 0.1, ell=-1)
