"""Turn a floating-point solution into a rigorous bound, then replay it.

Writes the certificate to binary_circles_cert.json and shows that editing a
single matrix entry makes the replay fail.
"""

import json
from fractions import Fraction

from packbounds.euclidean_bounds import SphereInstance
from packbounds.verify import certify_instance, check

inst = SphereInstance(2, (Fraction(1, 2), Fraction(1)), 5)
cert = certify_instance(inst, eta=Fraction(1, 10**6), precision=113)
print(cert.summary())
print(f"floating bound {cert.float_bound:.10f}")

js = cert.to_json()
with open("binary_circles_cert.json", "w") as fh:
    json.dump(js, fh, indent=1)
print("replay:", "ok" if check(js).ok else "rejected")

name = sorted(js["matrices"])[0]
js["matrices"][name][0][0] = str(Fraction(js["matrices"][name][0][0]) * 2)
res = check(js)
print("tampered replay:", "ok" if res.ok else "rejected", res.failures[:1])
