"""Tests for work-extraction plan synthesis and protocol simulation."""

import math

import numpy as np
import pytest

from thermoflux.core import (
    DensityMatrix,
    ThermalContext,
    relative_entropy,
    thermal_state,
)
from thermoflux.estimation import classical_relative_entropy
from thermoflux.extraction import (
    ConditionedProtocol,
    ConverseViolationError,
    UniversalParams,
    WorkAlphabet,
    build_classical_plan,
    choose_shift,
    measure_and_prepare_protocol,
    protocol_description_hash,
    run_classical_plan,
    simulate_plan_stringwise,
    state_aware_protocol,
    tomographic_universal_protocol,
    universal_protocol,
    verify_conditioned_protocol,
)
from thermoflux.pinching import energy_pinching
from thermoflux.typeclass import ShiftFunction

QUBIT = ThermalContext(levels=(0, 1), beta=1.0)
ALPHABET = WorkAlphabet.from_context(QUBIT)
GROUND = np.array([1.0, 0.0])
LN_LIMIT = math.log(1.0 + math.exp(-1.0))


class TestWorkAlphabet:
    def test_thermal_distribution(self):
        t = ALPHABET.thermal
        assert t[0] == pytest.approx(1.0 / (1.0 + math.exp(-1.0)))

    def test_energies_are_exact(self):
        from fractions import Fraction

        assert ALPHABET.energies == (Fraction(0), Fraction(1))


class TestChooseShift:
    def test_thermal_input_yields_zero_shift(self):
        h = choose_shift(ALPHABET.thermal, ALPHABET, 100, margin_nats=0.0)
        assert h.shifts == (0, 0)

    def test_margin_exhausting_budget_yields_zero_shift(self):
        h = choose_shift(GROUND, ALPHABET, 100, margin_nats=1.0)
        assert h.shifts == (0, 0)

    def test_ground_state_extracts_positive_work(self):
        h = choose_shift(GROUND, ALPHABET, 200, margin_nats=0.0)
        w = float(h.work(ALPHABET.energies))
        assert 0.0 < w / 200 <= LN_LIMIT

    def test_budget_respected(self):
        p = np.array([0.95, 0.05])
        n = 150
        h = choose_shift(p, ALPHABET, n, margin_nats=0.0)
        rate = float(h.work(ALPHABET.energies)) / n
        assert rate <= classical_relative_entropy(p, ALPHABET.thermal) + 1e-12

    def test_negative_margin_rejected(self):
        with pytest.raises(ValueError):
            choose_shift(GROUND, ALPHABET, 100, margin_nats=-0.1)


class TestClassicalPlan:
    def test_zero_shift_zero_infidelity(self):
        h = ShiftFunction((0, 0))
        plan = build_classical_plan(np.array([0.6, 0.4]), ALPHABET, 10, 20, h, mode="exact")
        assert plan.xi == pytest.approx(0.0, abs=1e-12)
        assert float(plan.work) == 0.0

    def test_infidelity_decreases_with_n(self):
        xis = []
        for n in (50, 100, 200):
            l = math.ceil(n ** 1.5)
            h = choose_shift(GROUND, ALPHABET, n, margin_nats=0.0, l=l)
            plan = build_classical_plan(GROUND, ALPHABET, n, l, h, mode="exact")
            assert plan.xi < 0.2
            xis.append(plan.xi)

    def test_overdraw_fails_loudly(self):
        """Demanding more work than the relative-entropy budget must push the
        atypical mass above one half."""
        p = np.array([0.9, 0.1])
        n, l = 30, 50
        h = ShiftFunction((-10, 10))  # rate 1/3 nats >> D(p||t) ~ 0.088
        plan = build_classical_plan(p, ALPHABET, n, l, h, mode="exact")
        assert plan.xi >= 0.5
        with pytest.raises(ConverseViolationError):
            run_classical_plan(plan)

    def test_sampled_mode_requires_seed(self):
        h = ShiftFunction((0, 0))
        with pytest.raises(ValueError):
            build_classical_plan(GROUND, ALPHABET, 10, 20, h, mode="sampled")

    def test_sampled_agrees_with_exact(self):
        n = 100
        l = 1000
        h = choose_shift(GROUND, ALPHABET, n, margin_nats=0.0, l=l)
        exact = build_classical_plan(GROUND, ALPHABET, n, l, h, mode="exact")
        sampled = build_classical_plan(
            GROUND, ALPHABET, n, l, h, mode="sampled", seed=3, samples=400
        )
        assert abs(sampled.xi - exact.xi) <= 3 * sampled.xi_stderr + 0.01

    def test_run_reports_exact_fidelity(self):
        h = ShiftFunction((0, 0))
        plan = build_classical_plan(ALPHABET.thermal, ALPHABET, 10, 20, h, mode="exact")
        out = run_classical_plan(plan)
        assert out.fidelity == pytest.approx(1.0)
        assert out.rate_nats == 0.0


class TestStringwiseOracle:
    def test_matches_distribution_level(self):
        plan = build_classical_plan(
            np.array([0.8, 0.2]), ALPHABET, 4, 2, ShiftFunction((-1, 1)), mode="exact"
        )
        out = run_classical_plan(plan, enforce_converse=False)
        oracle = simulate_plan_stringwise(plan)
        assert oracle["xi"] == pytest.approx(plan.xi, abs=1e-9)
        assert oracle["work"] == pytest.approx(out.extracted_work, abs=1e-12)
        assert oracle["fidelity"] == pytest.approx(out.fidelity, abs=1e-9)


class TestStateAwareProtocol:
    def test_diagonal_state_k1_reduces_to_classical(self):
        rho = DensityMatrix.from_diagonal([1.0, 0.0])
        n = 60
        out = state_aware_protocol(rho, QUBIT, n, k=1)
        l = out.copies_consumed["bath"]
        h = choose_shift(GROUND, ALPHABET, n, margin_nats=0.0, l=l)
        plan = build_classical_plan(GROUND, ALPHABET, n, l, h, mode="exact")
        ref = run_classical_plan(plan)
        assert out.extracted_work == pytest.approx(ref.extracted_work)
        assert out.xi == pytest.approx(plan.xi, abs=1e-12)

    def test_plus_state_k1_pinched_target_is_maximally_mixed(self):
        """Single-copy pinching dephases |+><+| to I/2, so the accessible
        budget collapses to D(I/2 || tau) ~ 0.1201 nats."""
        plus = DensityMatrix.pure(np.array([1.0, 1.0]) / math.sqrt(2))
        out = state_aware_protocol(plus, QUBIT, 40, k=1)
        mixed = DensityMatrix.from_diagonal([0.5, 0.5])
        expected = relative_entropy(mixed, thermal_state(QUBIT))
        assert out.details["pinned_target"] == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(0.120114, abs=1e-6)

    def test_plus_state_pinched_target_grows_with_k(self):
        plus = DensityMatrix.pure(np.array([1.0, 1.0]) / math.sqrt(2))
        t1 = state_aware_protocol(plus, QUBIT, 12, k=1).details["pinned_target"]
        t3 = state_aware_protocol(plus, QUBIT, 12, k=3).details["pinned_target"]
        assert t3 > t1

    def test_converse_reported_against_true_state(self):
        rho = DensityMatrix.from_diagonal([1.0, 0.0])
        out = state_aware_protocol(rho, QUBIT, 50, k=1)
        assert out.rate_nats <= out.target_rate + 1e-8


class TestUniversalParams:
    def test_schedule_at_ten_thousand(self):
        params = UniversalParams.from_schedule(10000, QUBIT)
        assert params.k == 4
        assert params.q == 2500
        assert params.m == 1250  # Hoeffding m capped at q/2
        assert params.eps == pytest.approx(math.exp(-10000 ** (1.0 / 3.0)))

    def test_capped_m_keeps_hoeffding_guarantee(self):
        """When m is capped the radius is recomputed so that
        2 m r^2 >= d^k ln 2 + ln(2/eps) still holds."""
        params = UniversalParams.from_schedule(10000, QUBIT)
        lhs = 2 * params.m * params.r ** 2
        rhs = 2 ** params.k * math.log(2) + math.log(2.0 / params.eps)
        assert lhs >= rhs - 1e-9

    def test_k_grows_with_n(self):
        ks = [UniversalParams.from_schedule(n, QUBIT).k for n in (100, 1000, 10000)]
        assert ks == sorted(ks)
        assert ks[0] >= 1


class TestUniversalProtocol:
    def test_thermal_input_extracts_nothing(self):
        params = UniversalParams.from_schedule(1000, QUBIT)
        out = universal_protocol(thermal_state(QUBIT), QUBIT, params, seed=0, mode="exact")
        assert out.extracted_work == 0.0
        assert out.fidelity == pytest.approx(1.0)

    def test_ground_state_positive_rate_at_large_n(self):
        ground = DensityMatrix.pure(np.array([1.0, 0.0]))
        params = UniversalParams.from_schedule(10000, QUBIT)
        out = universal_protocol(ground, QUBIT, params, seed=0, mode="sampled")
        assert 0.0 < out.rate_nats < LN_LIMIT

    def test_protocol_hash_is_state_independent(self):
        params = UniversalParams.from_schedule(1000, QUBIT)
        ground = DensityMatrix.pure(np.array([1.0, 0.0]))
        h1 = universal_protocol(ground, QUBIT, params, seed=2).details["protocol_hash"]
        h2 = universal_protocol(thermal_state(QUBIT), QUBIT, params, seed=2).details[
            "protocol_hash"
        ]
        assert h1 == h2
        assert h1 == protocol_description_hash(QUBIT, params)

    def test_fidelity_bound(self):
        ground = DensityMatrix.pure(np.array([1.0, 0.0]))
        params = UniversalParams.from_schedule(1000, QUBIT)
        out = universal_protocol(ground, QUBIT, params, seed=1, mode="sampled")
        assert out.fidelity >= 1.0 - 2.0 * params.eps - out.xi - 1e-12

    def test_exact_mode_isolates_structural_losses(self):
        ground = DensityMatrix.pure(np.array([1.0, 0.0]))
        params = UniversalParams.from_schedule(2000, QUBIT)
        out = universal_protocol(ground, QUBIT, params, seed=0, mode="exact")
        assert out.details["m"] == 0
        assert out.details["margin"] == 0.0


class TestMeasureAndPrepare:
    def test_block_assignment_example(self):
        summary, out = measure_and_prepare_protocol(4, QUBIT, 30, np.array([0.9, 0.1]))
        assert out.details["dominant_block"] == (4, 0)

    def test_thermal_input_low_rate(self):
        t = QUBIT.gibbs_probabilities()
        summary, out = measure_and_prepare_protocol(4, QUBIT, 200, t)
        assert out.rate_nats < 0.02

    def test_battery_is_gibbs_preserving(self):
        summary, _ = measure_and_prepare_protocol(4, QUBIT, 100, np.array([1.0, 0.0]))
        assert summary["gibbs_deviation"] <= 1e-12

    def test_boundary_input_flagged(self):
        summary, _ = measure_and_prepare_protocol(4, QUBIT, 20, np.array([0.875, 0.125]))
        assert summary["boundary"]

    def test_interior_input_not_flagged(self):
        summary, _ = measure_and_prepare_protocol(4, QUBIT, 20, np.array([0.9, 0.1]))
        assert not summary["boundary"]


class TestTomographicProtocol:
    def test_zero_error_matches_state_aware(self):
        plus = DensityMatrix.pure(np.array([1.0, 1.0]) / math.sqrt(2))
        a = state_aware_protocol(plus, QUBIT, 40, k=2)
        b = tomographic_universal_protocol(plus, QUBIT, 40, k=2, eta=0.0)
        assert b.extracted_work == pytest.approx(a.extracted_work)

    def test_diagonal_state_immune_to_dephasing(self):
        rho = DensityMatrix.from_diagonal([1.0, 0.0])
        a = tomographic_universal_protocol(rho, QUBIT, 40, k=1, eta=0.0)
        b = tomographic_universal_protocol(rho, QUBIT, 40, k=1, eta=0.05, seed=3)
        assert b.rate_nats <= a.rate_nats + 1e-12

    def test_estimation_error_costs_bounded_rate(self):
        plus = DensityMatrix.pure(np.array([1.0, 1.0]) / math.sqrt(2))
        eta = 0.1
        perfect = tomographic_universal_protocol(plus, QUBIT, 40, k=2, eta=0.0)
        noisy = tomographic_universal_protocol(plus, QUBIT, 40, k=2, eta=eta, seed=5)
        allowance = 2.0 * QUBIT.continuity_constant(2) * eta
        assert noisy.rate_nats >= perfect.rate_nats - allowance - 1e-9


class TestConditionedProtocol:
    def test_trivial_protocol_passes(self):
        fam = energy_pinching(QUBIT, 1).family
        cp = ConditionedProtocol(
            measurement=fam,
            branches=tuple(lambda r: r for _ in range(len(fam))),
            ctx=QUBIT,
            copies_measured=1,
            copies_remaining=2,
        )
        report = verify_conditioned_protocol(cp)
        assert report["passes"]

    def test_coherent_measurement_flagged(self):
        from thermoflux.pinching import ProjectorFamily

        v = np.array([1.0, 1.0]) / math.sqrt(2)
        w = np.array([1.0, -1.0]) / math.sqrt(2)
        fam = ProjectorFamily(dim=2, projectors=(np.outer(v, v), np.outer(w, w)))
        cp = ConditionedProtocol(
            measurement=fam,
            branches=(lambda r: r, lambda r: r),
            ctx=QUBIT,
            copies_measured=1,
            copies_remaining=1,
        )
        report = verify_conditioned_protocol(cp)
        assert not report["passes"]
        assert any("incoherent" in v for v in report["violations"])

    def test_non_gibbs_branch_flagged(self):
        fam = energy_pinching(QUBIT, 1).family

        def bad_branch(r):
            return np.eye(r.shape[0]) / r.shape[0]

        cp = ConditionedProtocol(
            measurement=fam,
            branches=(bad_branch, bad_branch),
            ctx=QUBIT,
            copies_measured=1,
            copies_remaining=1,
        )
        report = verify_conditioned_protocol(cp)
        assert not report["passes"]
