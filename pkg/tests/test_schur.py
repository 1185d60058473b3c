"""Tests for the symmetric-group/unitary-group joint block decomposition."""

import itertools
import math

import numpy as np
import pytest

from thermoflux.core import ThermalContext, thermal_state, tensor_power
from thermoflux.schur import (
    SchurBasis,
    YoungDiagram,
    build_schur_basis,
    decompose_permutation_invariant,
    enumerate_young_diagrams,
    hook_length_dimension,
    irrep_dimensions,
    permutation_operator,
    standard_tableaux,
    weyl_dimension,
    yor_matrix,
)

QUBIT = ThermalContext(levels=(0, 1), beta=1.0)


class TestYoungDiagrams:
    def test_rows_must_be_non_increasing(self):
        with pytest.raises(ValueError):
            YoungDiagram(rows=(1, 2))

    def test_enumeration_depth_bound(self):
        """Diagrams with at most d rows partition n."""
        for n, d in [(3, 2), (4, 2), (4, 3), (5, 3)]:
            diags = enumerate_young_diagrams(n, d)
            assert all(dg.depth <= d and dg.total == n for dg in diags)

    def test_three_boxes_two_rows(self):
        rows = [dg.rows for dg in enumerate_young_diagrams(3, 2)]
        assert rows == [(3,), (2, 1)]

    def test_dimension_identity(self):
        """sum over diagrams of n_lambda * m_lambda = d^n."""
        for n, d in [(3, 2), (4, 2), (5, 2), (3, 3), (4, 3)]:
            total = 0
            for dg in enumerate_young_diagrams(n, d):
                nl, ml = irrep_dimensions(dg, d)
                total += nl * ml
            assert total == d ** n

    def test_weyl_dimension_examples(self):
        assert weyl_dimension(YoungDiagram((3,)), 2) == 4
        assert weyl_dimension(YoungDiagram((2, 1)), 2) == 2
        assert weyl_dimension(YoungDiagram((2, 1)), 3) == 8

    def test_hook_length_examples(self):
        assert hook_length_dimension(YoungDiagram((3,))) == 1
        assert hook_length_dimension(YoungDiagram((2, 1))) == 2
        assert hook_length_dimension(YoungDiagram((2, 2))) == 2
        assert hook_length_dimension(YoungDiagram((3, 2))) == 5

    def test_standard_tableaux_count_matches_hook_formula(self):
        for rows in [(2, 1), (2, 2), (3, 1), (3, 2), (2, 1, 1)]:
            dg = YoungDiagram(rows)
            assert len(standard_tableaux(dg)) == hook_length_dimension(dg)


class TestSymmetricGroupRepresentation:
    def test_yor_is_homomorphism(self):
        dg = YoungDiagram((2, 1))
        perms = list(itertools.permutations(range(3)))
        for p in perms:
            for q in perms:
                pq = tuple(p[q[j]] for j in range(3))
                assert np.allclose(
                    yor_matrix(dg, pq), yor_matrix(dg, p) @ yor_matrix(dg, q), atol=1e-12
                )

    def test_yor_is_orthogonal(self):
        dg = YoungDiagram((3, 2))
        for p in [(1, 0, 2, 3, 4), (4, 3, 2, 1, 0), (1, 2, 3, 4, 0)]:
            u = yor_matrix(dg, p)
            assert np.allclose(u @ u.T, np.eye(u.shape[0]), atol=1e-12)

    def test_permutation_operator_is_homomorphism(self):
        perms = list(itertools.permutations(range(3)))
        for p in perms[:4]:
            for q in perms[:4]:
                pq = tuple(p[q[j]] for j in range(3))
                assert np.allclose(
                    permutation_operator(pq, 3, 2),
                    permutation_operator(p, 3, 2) @ permutation_operator(q, 3, 2),
                    atol=1e-12,
                )

    def test_permutation_operator_moves_slots(self):
        """The operator for perm sends the basis string s to the string whose
        slot perm[j] holds s's slot-j letter."""
        perm = (1, 2, 0)
        v = np.zeros(8)
        v[0b100] = 1.0  # letter 1 in slot 0 (most-significant digit)
        out = permutation_operator(perm, 3, 2) @ v
        assert out[0b010] == pytest.approx(1.0)


class TestSchurBasisConstruction:
    def test_change_of_basis_is_unitary(self):
        for n, d in [(2, 2), (3, 2), (4, 2), (2, 3)]:
            u = build_schur_basis(n, d).change_of_basis
            assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-10)

    def test_block_dimensions_three_qubits(self):
        basis = build_schur_basis(3, 2)
        dims = [(b.diagram.rows, b.weyl_dim, b.sym_dim) for b in basis.blocks]
        assert dims == [((3,), 4, 1), ((2, 1), 2, 2)]

    def test_permutations_act_block_diagonally(self):
        """Conjugated permutation operators decompose as I (x) u_lambda."""
        basis = build_schur_basis(3, 2)
        u = basis.change_of_basis
        for perm in itertools.permutations(range(3)):
            v = u.conj().T @ permutation_operator(perm, 3, 2) @ u
            expected = []
            for b in basis.blocks:
                rep = yor_matrix(b.diagram, perm)
                expected.append(np.kron(np.eye(b.weyl_dim), rep))
            from scipy.linalg import block_diag

            assert np.allclose(v, block_diag(*expected), atol=1e-9)

    def test_symmetric_block_vectors_are_type_sums(self):
        """The multiplicity-free symmetric block consists of the normalized
        sums over each type class."""
        basis = build_schur_basis(3, 2)
        sym = basis.blocks[0]
        for i in range(sym.weyl_dim):
            v = sym.copies[:, i, 0]
            weight = sum(bin(s).count("1") for s in np.flatnonzero(np.abs(v) > 1e-12))
            support = np.flatnonzero(np.abs(v) > 1e-12)
            assert np.allclose(
                np.abs(v[support]), 1.0 / math.sqrt(len(support)), atol=1e-12
            )

    def test_energy_labels_exact(self):
        basis = build_schur_basis(3, 2)
        labels = basis.blocks[0].energy_labels(QUBIT)
        assert sorted(float(e) for e in labels) == [0.0, 1.0, 2.0, 3.0]


class TestInvariantDecomposition:
    def test_thermal_tensor_power_decomposes(self):
        basis = build_schur_basis(3, 2)
        tau3 = tensor_power(thermal_state(QUBIT), 3).entries
        parts = decompose_permutation_invariant(tau3, basis)
        assert [dg.rows for dg, _ in parts] == [(3,), (2, 1)]
        total = sum(
            float(np.trace(a).real) * b.sym_dim
            for (_, a), b in zip(parts, basis.blocks)
        )
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_non_invariant_input_rejected(self):
        basis = build_schur_basis(2, 2)
        a = np.diag([0.0, 1.0, 0.0, 0.0])  # weight on |01> only: breaks swap symmetry
        with pytest.raises(ValueError):
            decompose_permutation_invariant(a, basis)
