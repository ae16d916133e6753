"""The erfc family: the potential changes shape with t, the spectrum does not.

Run: python3 demos/erfc_isospectral.py
"""

import numpy as np

from painleve_spectra import PotentialSpec, g1
from painleve_spectra.eigensolver import refine

x = np.linspace(-3, 3, 7)
print("V(x) for several t")
print("     x " + "".join(f"{'t=' + format(t, 'g'):>11}" for t in (0.0, 0.3, -1.0)))
rows = [g1(PotentialSpec.from_case("D", t=t), x) for t in (0.0, 0.3, -1.0)]
for i, xi in enumerate(x):
    print(f"{xi:6.2f} " + "".join(f"{r[i]:11.5f}" for r in rows))

print("lowest x levels (expected n - 1/6)")
for t in (0.0, 0.3, -1.0):
    spec = PotentialSpec.from_case("D", t=t)
    e = refine(lambda x, spec=spec: g1(spec, x), 5).energies
    print(f"  t={t:+.1f}: " + " ".join(f"{v:9.6f}" for v in e))
