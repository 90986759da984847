"""The limiting receipt-time law of the short-long torus.

Solves the nonlinear fixed-point equation for a few values of lambda,
checks the cube-root scaling between them and prints the left tail rate.
"""

import numpy as np

from rankgossip.fquad import left_tail_rate, solve_fquad

base = solve_fquad(1.0)
print(f"lambda = 1: residual {base.residual:.1e}, window {base.window_width():.4f}")
x = np.linspace(-4, 3, 701)
for lam in (0.5, 2.0, 8.0):
    s = solve_fquad(lam)
    err = np.max(np.abs(s(x) - base(lam ** (1 / 3) * x)))
    print(f"lambda = {lam:3.1f}: residual {s.residual:.1e}, scaling error {err:.1e}, "
          f"left tail rate {left_tail_rate(lam):.4f}")

for t in (-3, -2, -1, 0, 1, 2):
    print(f"F({t:+d}) = {base(t):.6f}")
