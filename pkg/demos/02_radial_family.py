"""
Radial solutions on the unit disk
=================================

Shooting in s = log r gives the radial branch to high accuracy.  Tracking it
in p and extrapolating in 1/p recovers the limiting constants.
"""

import math

from lel.asymptotics import extrapolate_limit
from lel.radial import continuation_radial, radial_diagnostics

P = [10, 20, 50, 100, 200, 400]
sols, fail = continuation_radial(P, 0.0)
assert fail is None

print(" p      u(0)      p∫v^(p+1)   L_p")
for s in sols:
    d = radial_diagnostics(s)
    print(f"{s.p:4.0f}  {s.a:.6f}  {d['energy_v']:10.4f}  {d['L_p']:8.4f}")

fit = [s for s in sols if s.p >= 50]
ps = [s.p for s in fit]
a0 = extrapolate_limit(ps, [s.a for s in fit])[0]
e0 = extrapolate_limit(ps, [radial_diagnostics(s)["energy_v"] for s in fit])[0]
print(f"u(0) -> {a0:.5f}   (sqrt(e) = {math.sqrt(math.e):.5f})")
print(f"energy -> {e0:.3f}  (8 pi e = {8 * math.pi * math.e:.3f})")

# With θ = 1 the two peaks differ at order 1/p.
sols1, _ = continuation_radial(P, 1.0)
fit1 = [s for s in sols1 if s.p >= 50]
gap = extrapolate_limit([s.p for s in fit1], [s.p * (s.b - s.a) for s in fit1])[0]
print(f"p(v(0) - u(0)) -> {gap:.4f}  (sqrt(e)/2 = {math.sqrt(math.e) / 2:.4f})")
