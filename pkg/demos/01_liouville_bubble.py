"""
The Liouville bubble
====================

The large-p limit of a Lane-Emden peak is an explicit radial solution of
-ΔU = e^V, -ΔV = e^U.  Here we look at its masses and fit it back from
samples.
"""

import math

import numpy as np

from lel.liouville import (SQRT_E, bubble_mass_numeric, bubble_mass_tail, fit_bubble,
                           liouville_value, profile_pair)

# Both masses equal 8π for θ = 0; truncating at R = 100 loses O(R^-2).
for R in (10.0, 100.0, np.inf):
    mU, mV = bubble_mass_numeric(0.0, SQRT_E, R)
    print(f"R = {R:>6}: mass {mV:.6f}  (8π = {8 * math.pi:.6f})")
print("tail at R = 100:", bubble_mass_tail(0.0, SQRT_E, 100.0)[1])

# The rescaled profiles (U_θ, V_θ) vanish at the origin and decay like -4 log|x|.
pts = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [100.0, 0.0]])
for theta in (0.0, 1.0):
    U, V = profile_pair(theta, SQRT_E, pts)
    print(f"theta = {theta}: U = {np.round(U, 4)}, V = {np.round(V, 4)}")

# Sample a shifted bubble and recover its scale and centre.
g = np.linspace(-4, 4, 17)
xy = np.array([(a, b) for a in g for b in g]) + [0.2, -0.1]
lam, c, _, rms = fit_bubble(xy, 0.0, values=liouville_value(2.0, (0.2, -0.1), xy))
print(f"fit: lambda = {lam:.8f}, centre = {np.round(c, 8)}, rms = {rms:.1e}")
