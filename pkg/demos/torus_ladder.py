"""Nearest-neighbor torus: equilibrium rate against system size.

The equilibrium rate should fall like 1/N, so theta* N stays roughly flat
while the calling cost per agent vanishes.  The ladder slope of cost on N
decides the efficiency label.
"""

import numpy as np

from rankgossip import RewardSpec, Topology, nash

sizes = [32, 64, 128]
spec = RewardSpec.linear()
ests = []
for N in sizes:
    e = nash.nash_fixed_point(Topology.torus_nn(N), spec, replicates=400, seed=5)
    ests.append(e)
    print(f"N = {N:4d}  theta* = {e.strategy[0]:.5f} +- {e.strategy_stderr[0]:.5f}  "
          f"theta* N = {e.strategy[0] * N:.3f}")

lad = nash.classify_ladder(sizes, ests)
print(f"log-log cost slope {lad['slope']:.3f} +- {lad['slope_stderr']:.3f} -> {lad['classification']}")
print("theta* N spread:", np.round(np.ptp([e.strategy[0] * N for e, N in zip(ests, sizes)]), 3))
