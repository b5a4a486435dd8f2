"""
Green and Robin functions, concentration points
===============================================

Peaks sit at critical points of the Kirchhoff-Routh function built from the
Green function.  The disk has a closed form; other domains use a numeric
harmonic part.
"""

import numpy as np

from lel.domains import DomainSpec
from lel.greens import GreenOracle, green_disk, kirchhoff_routh, solve_concentration_points

disk = GreenOracle(DomainSpec.unit_disk())
x = np.array([0.3, 0.0])
print("R(0.3, 0) =", disk.R(x), " grad R =", disk.grad_R(x))
print("G((0.5,0), 0) =", green_disk((0.5, 0.0), (0.0, 0.0)))

# A numeric oracle on the disk reproduces the closed form.
num = GreenOracle(DomainSpec.unit_disk(), h=0.02, numeric=True)
y = (0.3, 0.2)
print("numeric - exact at (-0.5, 0.1):", num.G((-0.5, 0.1), y) - green_disk((-0.5, 0.1), y))

# One peak on the square goes to the centre.
sq = GreenOracle(DomainSpec.square(), h=0.03)
res = solve_concentration_points(sq, 1, [(0.3, 0.65)])
print("square:", res.points[0], "converged", res.converged)

# Two peaks on a dumbbell, one per lobe.
dom = DomainSpec.dumbbell()
db = GreenOracle(dom, h=0.05)
res = solve_concentration_points(db, 2, dom.lobe_centers())
phi, grad = kirchhoff_routh(db, res.points)
print("dumbbell:", np.round(res.points, 5), "Phi =", round(phi, 6))
