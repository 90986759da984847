"""Equilibrium calling rate on the complete graph.

Agents pay theta per unit time to call random peers and are rewarded by
how early they hear the rumor.  With the linear reward the symmetric
equilibrium rate is 1/2; this script compares the closed form, the
Monte-Carlo best response at a few population rates, and the simulated
fixed point.
"""

import time

from rankgossip import RewardSpec, Topology
from rankgossip import analytic, nash

spec = RewardSpec.linear()
print(f"closed form theta* = {analytic.nash_cg(spec):.6f}")

top = Topology.complete(10_000)
for theta in (0.1, 0.5, 2.0):
    br = nash.best_response(top, spec, nash.StrategyProfile.scalar(theta), replicates=1000, seed=1)
    print(f"population theta = {theta:4.1f}  best response = {br.phi[0]:.4f}")

t0 = time.perf_counter()
est = nash.nash_fixed_point(top, spec, replicates=2000, seed=1)
lo, hi = (b[0] for b in est.ci())
print(f"simulated theta* = {est.strategy[0]:.4f}  (2-se interval {lo:.4f}..{hi:.4f})  "
      f"payoff {est.payoff:.4f}  class: {est.classification}  [{time.perf_counter() - t0:.0f}s]")
