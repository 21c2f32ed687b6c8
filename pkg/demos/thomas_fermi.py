"""Thomas-Fermi atoms from the universal screening function.

Solves Phi'' = Phi^{3/2}/sqrt(s) once, builds atoms at several Z on their own
grids, and checks the Z^{7/3} law and the phase-space identity
sc_energy(V_TF) = E_TF + D(rho_TF).
"""
import numpy as np

from scottlab.tf import sc_energy, solve_tf_ode, tf_atom, tf_grid

uni = solve_tf_ode()
print(f"Phi'(0) = {uni.initial_slope:.10f}   far-field exponent {uni.far_field_exponent:.3f}")

ref = None
for Z in (1, 8, 26, 92):
    atom = tf_atom(Z, tf_grid(Z), uni)
    sc = sc_energy(atom.v_tf, np.ones(atom.grid.n_points), atom.grid)
    ref = ref or atom.e_tf
    print(f"Z={Z:3d}  E_TF={atom.e_tf:12.4f}  E/Z^(7/3)={atom.e_tf / Z**(7/3):.6f}  "
          f"charge={atom.mass:8.4f}  identity defect={abs(sc - atom.e_tf - atom.d_self) / abs(atom.e_tf):.1e}")
