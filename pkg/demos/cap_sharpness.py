"""Two cap sizes on the 2-sphere: the pentagonal prism configuration is optimal.

Compares the exact linear-system certificate, the degree-4 SDP bound and the
density of the prism itself.
"""

from fractions import Fraction

import mpmath

from packbounds.cap_bounds import CapInstance, cap_bound, prism5_sharpness_certificate
from packbounds.numerics import ScaledRational
from packbounds.polynomials import cap_weight
from packbounds.solver import SolverConfig

small, large = ScaledRational(Fraction(1, 5), 1), ScaledRational(Fraction(3, 10), 1)

with mpmath.workdps(30):
    prism = 5 * cap_weight(3, small) + 2 * cap_weight(3, large)
print(f"prism density          {float(prism):.10f}")

view = prism5_sharpness_certificate()
print(f"linear-system bound    {float(view.bound):.10f}  ({view.status})")

for d in (2, 4, 6):
    b, status, _ = cap_bound(CapInstance(3, (small, large), d), SolverConfig(113))
    print(f"SDP bound, degree {d}    {b:.10f}  ({status})")
