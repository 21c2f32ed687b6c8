"""Finite-R estimates of the Scott function S_2(alpha).

The localized trace of the hydrogen-like operator minus its semiclassical
counterpart I_R, halved, tends to S_2(alpha).  At alpha = 0 the limit is 1/4.
The critical value 2/pi is resolved only slowly in the radial spacing; the
last block shows how much halving the spacing moves it.
"""
import numpy as np

from scottlab.scott import CRITICAL_ALPHA, scott_estimate, scott_table

est = scott_estimate(0.0, [8, 16, 32, 64])
for p in est.history:
    print(f"alpha=0  R={p.R:4.0f}  trace={p.trace:9.4f}  I_R={p.i_r:9.4f}  s2={p.s2:.4f}")
print(f"extrapolated S_2(0) = {est.extrapolated:.4f}  (exact 0.25)")

table = scott_table([0.0, 0.4, CRITICAL_ALPHA], [8, 16], spacing_check=True)
for e in table.entries:
    print(f"alpha={e.alpha:.4f}  s2(R=16)={e.s2_estimate:.4f}  extrapolated={e.extrapolated:.4f}")
print("non-increasing:", table.monotone)
sc = table.spacing_check
print(f"alpha=2/pi, R={sc['R']:g}: spacing {sc['spacing']:g} -> {sc['spacing'] / 2:g} "
      f"moves s2 by {sc['shift']:.3f}")
