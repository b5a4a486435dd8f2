"""
Test-function energy
====================

A cut-off Liouville bubble scaled onto the Nehari set gives an upper bound
for the least energy.  With a fixed cut-off radius the annulus contribution
grows with p, which this demo makes visible.
"""

import math

from lel.domains import DomainSpec
from lel.fem.test_function import test_function_energy

disk = DomainSpec.unit_disk()
print(" p     t_p      scaled energy   (8 pi e = %.3f)" % (8 * math.pi * math.e))
for p in (50, 100, 200, 400):
    r = test_function_energy(p, 0.0, disk)
    print(f"{p:4d}  {r['t_p']:.5f}  {r['scaled_energy']:12.3f}")
