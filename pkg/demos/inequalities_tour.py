"""Operator inequalities checked numerically.

Pull-out formula on random matrices, the IMS localization identity on a
Coulomb channel, the relativistic Hardy threshold at 2/pi and a fitted
Daubechies constant.
"""
import numpy as np

from scottlab import inequalities as iq
from scottlab.numerics import RadialGrid
from scottlab.radial import build_channel

rep = iq.pullout_test(trials=200)
print(f"pull-out: {rep.extra['violations']} violations in {rep.cases} trials, "
      f"worst margin {rep.worst_margin:.2e}")

grid = RadialGrid.from_extent(20.0, 0.05)
op = build_channel(grid, 1, -1.0 / grid.r)
h = op.kinetic + np.diag(op.potential)
res = iq.ims_identity_test(h, iq.smooth_partition(grid, 4.0))
print(f"IMS residual / ||h|| = {res / np.linalg.norm(h, 2):.1e}")

hardy = iq.hardy_ladder()
for row in hardy.table:
    print(f"Hardy c={row['coupling']:.4f} ({row['regime']}): "
          f"minima {np.round(row['min_eig'], 4).tolist()}")

dau = iq.daubechies_constant(0.1, [iq.gaussian_well(d) for d in (1, 4, 16)], (0.05, 0.025))
print(f"Daubechies constant {dau.empirical_constant:.4f}, "
      f"per grid {np.round(dau.extra['per_grid_constant'], 4).tolist()}")
