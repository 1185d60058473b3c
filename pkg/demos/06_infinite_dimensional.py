"""Truncating an infinite ladder: growing cutoffs keep the success probability.

A diagonal state with a power-law tail is truncated at d_n = ceil(sqrt(n)); the
per-protocol success probability Tr[rho_d]^n tends to one, and the renormalized
free energy of a geometric test state converges to its closed-form limit.
"""

import math

from thermoflux.infdim import (
    CandidateSet,
    CutoffSchedule,
    InfiniteContext,
    TailState,
    renormalized_free_energy,
    renormalized_free_energy_limit,
    schedule_success_curve,
    semiuniversal_protocol,
)

rho = TailState(epsilon=2.0)  # rho_ii = i^-4 / zeta(4)
sched = CutoffSchedule(epsilon=2.0)
print("Success probability under the growing cutoff schedule:")
for n, d_n, success in schedule_success_curve(rho, sched, [10 ** k for k in range(1, 7)]):
    print(f"  n = {n:>7d}: d_n = {d_n:4d}, Tr[rho_d]^n = {success:.6f}")

ctx = InfiniteContext(beta=1.0)
x = math.exp(-0.5)
geo = TailState(coefficients=tuple((1 - x) * x ** (i - 1) for i in range(1, 400)))
limit = renormalized_free_energy_limit(geo, ctx)
print(f"\nGeometric test state: free-energy limit {limit:.6f} nats")
for d in (10, 50, 200):
    print(f"  truncated at d={d:3d}: {renormalized_free_energy(geo, ctx, d):.6f}")

ground = TailState(coefficients=(1.0,))
cands = CandidateSet(states=(ground, TailState(
    coefficients=tuple((1 - math.exp(-1)) * math.exp(-(i - 1)) for i in range(1, 400))
)))
out = semiuniversal_protocol(cands, 0, ctx, 1000, seed=5)
print(
    f"\nSemiuniversal run over a two-state candidate set (truth: ground state):"
    f"\n  identified index {out.details['identified']}, rate {out.rate_nats:.4f}"
    f" (target {out.target_rate:.4f}), fidelity {out.fidelity:.4f}"
)
