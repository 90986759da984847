"""Short-long torus: how the receipt window reacts to each calling rate.

Cheap nearest-neighbor calls and expensive long-range calls combine into
a spread whose width scales like theta_near^(-2/3) theta_far^(-1/3).  We
sweep each rate over a 16-fold range on a 512 x 512 torus, then print the
limit equilibrium for a few long-call costs.
"""

from rankgossip import RewardSpec, nash
from rankgossip.scaling import window_sweep

for axis in ("near", "far"):
    sw = window_sweep(512, axis, near=1.0, far=1e-3, runs=4, seed=8)
    print(f"vary theta_{axis}: slope {sw.fit.slope:.3f} +- {sw.fit.stderr:.3f}")

spec = RewardSpec.linear()
area, dz1 = 18.94 / 16, -0.448 * 4     # lattice constants at edge rate 1/4
for c in (1e2, 1e3, 1e4):
    sl = nash.nash_short_long(spec, c, area, dz1)
    print(f"c_N = {c:7.0f}  theta_near = {sl.theta_near:.4f}  theta_far = {sl.theta_far:.3e}  "
          f"cost = {sl.cost:.4f}")
