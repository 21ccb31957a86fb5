"""Upper bounds for packings of circles with radii 1/2 and 1, by degree.

The bounds decrease with the degree and stay above the hexagonal density pi/sqrt(12).
"""

import math
from fractions import Fraction

from packbounds.euclidean_bounds import SphereInstance, florian_2d_bound, sphere_bound
from packbounds.solver import SolverConfig

print(f"hexagonal packing      {math.pi / math.sqrt(12):.8f}")
print(f"Florian bound          {florian_2d_bound(Fraction(1, 2)):.8f}")
for d in (3, 5, 7, 9, 11):
    b, status, _ = sphere_bound(SphereInstance(2, (Fraction(1, 2), Fraction(1)), d), SolverConfig(113))
    print(f"degree {d:2d}              {b:.8f}  ({status})")
