"""
Finite-element solutions in two dimensions
==========================================

P1 elements, Newton with a block-preconditioned GMRES, and continuation in p
on graded meshes.  The disk solution is checked against the radial one.
"""

import numpy as np

from lel.asymptotics import detect_peaks, pohozaev_residual, solution_energies
from lel.domains import DomainSpec
from lel.fem.continuation import continuation_2d
from lel.radial import continuation_radial

sols, fail = continuation_2d(DomainSpec.unit_disk(), [6, 8, 10], 0.0, [(0.0, 0.0)])
rad, _ = continuation_radial([6, 8, 10], 0.0)
for s, r in zip(sols, rad):
    print(f"p = {s.p:4.1f}: nodes {s.mesh.n_nodes:6d}, max u {s.u.max():.5f}, radial {r.a:.5f}")

s = sols[-1]
e = solution_energies(s)
print("p ∫∇u·∇v =", e["energy_uv"], " p ∫v^(p+1) =", e["energy_v"])
r23, r24, parts = pohozaev_residual(s, (0.0, 0.0), 0.3)
print("Pohozaev relative residual:", r23 / parts["dominant"], " imbalance:", np.round(r24, 6))

# The unit square: a single peak at the centre.
sq, fail = continuation_2d(DomainSpec.square(), [8], 0.0, [(0.5, 0.5)])
print("square peaks:", [pk.x_peak for pk in detect_peaks(sq[0])])
