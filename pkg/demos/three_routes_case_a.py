"""Case A spectrum computed three independent ways.

1. unitary representations of the cubic algebra
2. ladders seeded by normalizable zero modes
3. finite-difference diagonalisation of the x part

Run: python3 demos/three_routes_case_a.py
"""

import numpy as np

from painleve_spectra import PotentialSpec, case_params, catalogue, g1
from painleve_spectra.cubic_algebra import derive_spectra, x_part_levels
from painleve_spectra.eigensolver import refine
from painleve_spectra.susy import realized_ladders

params = case_params("A")
series = derive_spectra(params)
print("series allowed by the algebra (2D energies):")
for s in series:
    kind = "infinite" if s.infinite else f"p in {list(s.valid_p)}"
    print(f"  {s.case_id:10s} E(p) = {s.intercept:+.4f} + p   {kind}")

ladders = realized_ladders(params, catalogue("A"))
print("ladders seeded by zero modes (1D x energies):")
for lad in ladders:
    size = "unbounded" if lad.length is None else f"{lad.length} rung(s)"
    print(f"  {lad.label}: base {lad.base:+.4f}, {size}")

spec = PotentialSpec.from_case("A")
eig = refine(lambda x: g1(spec, x), 6).energies
alg = x_part_levels(series, 6)
print(f"{'level':>5} {'algebra':>10} {'eigensolver':>12}")
for k, (a, e) in enumerate(zip(alg, eig)):
    print(f"{k:5d} {a:10.6f} {e:12.8f}")
print("max difference", float(np.max(np.abs(np.array(alg) - eig))))
