"""Free-energy recovery under Schur pinching.

Single-copy dephasing destroys the coherent free energy of |+><+|; pinching
larger blocks jointly recovers it at a polylogarithmic per-copy cost.
"""

import math

import numpy as np

from thermoflux.core import (
    DensityMatrix,
    ThermalContext,
    relative_entropy,
    tensor_power,
    thermal_state,
)
from thermoflux.pinching import apply, schur_pinching

ctx = ThermalContext(levels=(0, 1), beta=1.0)
plus = DensityMatrix.pure(np.array([1.0, 1.0]) / math.sqrt(2))
tau = thermal_state(ctx)
target = relative_entropy(plus, tau)

print(f"Free energy of |+><+| relative to tau: {target:.5f} nats\n")
print(" k   per-copy pinched value   loss bound (2/k)ln(k+1)")
for k in range(1, 7):
    channel = schur_pinching(ctx, k)
    rk = tensor_power(plus, k).entries
    tk = tensor_power(tau, k).entries
    value = relative_entropy(apply(channel, rk), tk) / k
    bound = (2.0 / k) * math.log(k + 1)
    print(f" {k}   {value:.5f}                  {bound:.5f}")
print("\nThe recovered value climbs toward the target as k grows; the deficit")
print("always stays inside the (2/k) ln(k+1) envelope.")
