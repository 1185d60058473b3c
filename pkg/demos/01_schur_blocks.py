"""Block-diagonalizing three qubits in the Schur basis.

Builds the joint symmetric-group / unitary-group decomposition of (C^2)^{x3},
prints the block dimension table, and shows that the thermal tensor power
splits into commuting blocks.
"""

import numpy as np

from thermoflux.core import ThermalContext, tensor_power, thermal_state
from thermoflux.schur import build_schur_basis, decompose_permutation_invariant

ctx = ThermalContext(levels=(0, 1), beta=1.0)
basis = build_schur_basis(3, 2)

print("Schur blocks of three qubits:")
for block in basis.blocks:
    print(
        f"  diagram {block.diagram.rows}: "
        f"unitary-group dim {block.weyl_dim}, multiplicity {block.sym_dim}"
    )
total = sum(b.weyl_dim * b.sym_dim for b in basis.blocks)
print(f"  total dimension {total} = 2^3\n")

tau3 = tensor_power(thermal_state(ctx), 3).entries
parts = decompose_permutation_invariant(tau3, basis)
print("Thermal state tau^(x3) decomposed per block (trace x multiplicity):")
for diagram, a_lam in parts:
    weight = float(np.trace(a_lam).real)
    print(f"  {diagram.rows}: block trace {weight:.6f}")
