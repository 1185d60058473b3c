"""The state-agnostic protocol: learn, then extract.

The same fixed pipeline (Schur pinch, type measurement on a sample of blocks,
budgeted shift choice) is applied to different input states; only the measured
data steers the branch that runs.  The protocol hash demonstrates that the
synthesized channel never saw the state description.
"""

import numpy as np

from thermoflux.core import DensityMatrix, ThermalContext, thermal_state
from thermoflux.extraction import UniversalParams, universal_protocol

ctx = ThermalContext(levels=(0, 1), beta=1.0)
ground = DensityMatrix.pure(np.array([1.0, 0.0]))
tau = thermal_state(ctx)

for n in (1000, 10000):
    params = UniversalParams.from_schedule(n, ctx)
    print(f"n = {n}: k={params.k}, measured blocks m={params.m}, "
          f"radius r={params.r:.4f}")
    for label, rho in (("ground state", ground), ("thermal state", tau)):
        out = universal_protocol(rho, ctx, params, seed=0, mode="sampled")
        print(
            f"  {label:13s}: W = {out.extracted_work:6.1f}, "
            f"rate = {out.rate_nats:.4f} (target {out.target_rate:.4f}), "
            f"fidelity = {out.fidelity:.6f}"
        )
    h_g = universal_protocol(ground, ctx, params, seed=0).details["protocol_hash"]
    h_t = universal_protocol(tau, ctx, params, seed=0).details["protocol_hash"]
    print(f"  protocol hash identical across inputs: {h_g == h_t}\n")

print("At n=1000 the statistical margin still swallows the whole budget and the")
print("protocol honestly extracts nothing; at n=10000 it extracts real work")
print("from the ground state while leaving the thermal state untouched.")
