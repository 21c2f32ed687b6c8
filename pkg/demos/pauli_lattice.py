"""Lattice Pauli operator with Peierls phases.

A constant field with two flux quanta carries near-zero modes whose energy
tends to 0 under refinement; the critical Hardy-Lieb-Thirring battery fits a
constant for a localized bump field.
"""
import numpy as np

from scottlab.pauli import (FieldSpec, LatticeBox, build_gauge, build_pauli, cphlt_check,
                            gaussian_site_potential, lowest_eigenvalue)

for N in (8, 16):
    g = build_gauge(LatticeBox(4.0, N), FieldSpec("constant", flux=2))
    print(f"constant field N={N:2d}: lowest eigenvalue {lowest_eigenvalue(build_pauli(g)):.5f}")

box = LatticeBox(6.0, 8)
g = build_gauge(box, FieldSpec("bump", amplitude=0.3, radius=2.0))
rep = cphlt_check(g, [gaussian_site_potential(box, d, 1.0) for d in (0.5, 2.0)])
for row in rep.table:
    print({k: (round(v, 5) if isinstance(v, float) else v) for k, v in row.items()})
print(f"fitted constant {rep.empirical_constant:.4f}")
