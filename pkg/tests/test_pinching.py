"""Tests for pinching channels and their quantitative guarantees."""

import math

import numpy as np
import pytest

from thermoflux.core import (
    DensityMatrix,
    ThermalContext,
    relative_entropy,
    tensor_power,
    thermal_state,
)
from thermoflux.pinching import (
    PinchingChannel,
    ProjectorFamily,
    apply,
    choi_matrix,
    coarse_pinching,
    energy_pinching,
    mixture_realization,
    pinching_inequality_check,
    relative_entropy_loss,
    schur_pinched_distribution,
    schur_pinching,
)

QUBIT = ThermalContext(levels=(0, 1), beta=1.0)
PLUS = DensityMatrix.pure(np.array([1.0, 1.0]) / math.sqrt(2))


class TestProjectorFamily:
    def test_incomplete_family_rejected(self):
        p = np.diag([1.0, 0.0])
        with pytest.raises(ValueError):
            ProjectorFamily(dim=2, projectors=(p,))

    def test_non_idempotent_rejected(self):
        with pytest.raises(ValueError):
            ProjectorFamily(dim=2, projectors=(0.5 * np.eye(2), 0.5 * np.eye(2)))

    def test_non_orthogonal_rejected(self):
        v = np.array([1.0, 1.0]) / math.sqrt(2)
        p1 = np.outer(v, v)
        p2 = np.eye(2) - np.diag([1.0, 0.0])
        with pytest.raises(ValueError):
            ProjectorFamily(dim=2, projectors=(p1, np.diag([1.0, 0.0]), -p2 + p2))

    def test_commutes_with_diagonal_hamiltonian(self):
        fam = energy_pinching(QUBIT, 2).family
        h = np.diag([0.0, 1.0, 1.0, 2.0])
        assert fam.commutes_with(h)


class TestEnergyPinching:
    def test_projector_count_matches_distinct_energies(self):
        channel = energy_pinching(QUBIT, 3)
        assert len(channel.family) == 4  # total energies 0..3

    def test_kills_cross_energy_coherence(self):
        channel = energy_pinching(QUBIT, 1)
        out = apply(channel, PLUS.entries)
        assert abs(out[0, 1]) < 1e-14
        assert out[0, 0] == pytest.approx(0.5)

    def test_preserves_diagonal_states(self):
        channel = energy_pinching(QUBIT, 2)
        tau2 = tensor_power(thermal_state(QUBIT), 2).entries
        assert np.allclose(apply(channel, tau2), tau2, atol=1e-14)

    def test_trace_preserving(self):
        rng = np.random.default_rng(5)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = g @ g.conj().T
        rho = rho / rho.trace().real
        out = apply(energy_pinching(QUBIT, 2), rho)
        assert out.trace().real == pytest.approx(1.0, abs=1e-12)


class TestSchurPinching:
    def test_three_qubit_projector_ranks(self):
        channel = schur_pinching(QUBIT, 3)
        ranks = sorted(
            int(round(p.trace().real)) for p in channel.family.projectors
        )
        assert ranks == [1, 1, 1, 1, 2, 2]

    def test_projector_count_within_polynomial_bound(self):
        for n in (2, 3, 4, 5):
            channel = schur_pinching(QUBIT, n)
            assert len(channel.family) <= (n + 1) ** 2

    def test_finer_than_energy_pinching_on_invariant_states(self):
        """Schur pinching refines energy pinching, so applying energy pinching
        afterwards changes nothing."""
        rho3 = tensor_power(PLUS, 3).entries
        fine = apply(schur_pinching(QUBIT, 3), rho3)
        assert np.allclose(apply(energy_pinching(QUBIT, 3), fine), fine, atol=1e-12)

    def test_thermal_state_is_fixed_point(self):
        tau3 = tensor_power(thermal_state(QUBIT), 3).entries
        assert np.allclose(apply(schur_pinching(QUBIT, 3), tau3), tau3, atol=1e-12)


class TestMixtureRealization:
    def test_uniform_mixture_equals_pinching(self):
        channel = schur_pinching(QUBIT, 2)
        us = mixture_realization(channel)
        rng = np.random.default_rng(7)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = g @ g.conj().T
        rho = rho / rho.trace().real
        mix = sum(u @ rho @ u.conj().T for u in us) / len(us)
        assert np.allclose(mix, apply(channel, rho), atol=1e-12)

    def test_members_are_unitary(self):
        for u in mixture_realization(energy_pinching(QUBIT, 2)):
            assert np.allclose(u @ u.conj().T, np.eye(4), atol=1e-12)


class TestQuantitativeBounds:
    def test_pinching_inequality_qubit(self):
        k = 3
        channel = schur_pinching(QUBIT, k)
        rk = tensor_power(PLUS, k).entries
        mineig, ok = pinching_inequality_check(channel, rk, (k + 1) ** 2)
        assert ok

    def test_loss_bound_qubit(self):
        for k in (1, 2, 3, 4):
            channel = schur_pinching(QUBIT, k)
            rk = tensor_power(PLUS, k).entries
            loss = relative_entropy_loss(channel, rk, k)
            assert loss <= (2.0 / k) * math.log(k + 1) + 1e-10

    def test_free_energy_recovery_monotone(self):
        tau = thermal_state(QUBIT)
        target = relative_entropy(PLUS, tau)
        prev = -1.0
        for k in (1, 2, 3):
            channel = schur_pinching(QUBIT, k)
            rk = tensor_power(PLUS, k).entries
            tk = tensor_power(tau, k).entries
            val = relative_entropy(apply(channel, rk), tk) / k
            assert val >= prev - 1e-12
            assert val <= target + 1e-12
            prev = val


class TestChoi:
    def test_choi_is_psd(self):
        choi = choi_matrix(schur_pinching(QUBIT, 2))
        assert np.linalg.eigvalsh(choi).min() >= -1e-12

    def test_choi_partial_trace_identity(self):
        """Trace preservation: tracing the output leg gives the identity."""
        channel = energy_pinching(QUBIT, 1)
        choi = choi_matrix(channel)
        d = channel.dim
        reduced = choi.reshape(d, d, d, d).trace(axis1=1, axis2=3)
        assert np.allclose(reduced, np.eye(d), atol=1e-12)


class TestCoarsePinching:
    def test_two_blocks(self):
        channel = coarse_pinching(2, 4)
        assert len(channel.family) == 2

    def test_invalid_cut_rejected(self):
        with pytest.raises(ValueError):
            coarse_pinching(4, 4)


class TestPinchedDistribution:
    def test_ground_state_point_mass_on_zero_energy_letter(self):
        ground = DensityMatrix.pure(np.array([1.0, 0.0]))
        probs, energies = schur_pinched_distribution(QUBIT, 2, ground)
        assert probs.sum() == pytest.approx(1.0)
        top = int(np.argmax(probs))
        assert probs[top] == pytest.approx(1.0, abs=1e-12)
        assert float(energies[top]) == 0.0

    def test_thermal_matches_gibbs_weights(self):
        tau = thermal_state(QUBIT)
        probs, energies = schur_pinched_distribution(QUBIT, 2, tau)
        z = QUBIT.partition_function
        for p, e in zip(probs, energies):
            assert p == pytest.approx(math.exp(-float(e)) / z ** 2, abs=1e-12)
