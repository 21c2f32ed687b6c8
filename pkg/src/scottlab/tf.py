"""Atomic Thomas-Fermi theory.

The neutral atom is reduced to the universal screening function Phi,

    Phi''(s) = Phi(s)^{3/2} / sqrt(s),   Phi(0) = 1,   Phi(inf) = 0,

and V^TF(r) = (Z/r) Phi(r/b).  Everything else (density, energy, Coulomb
self-energy, semiclassical energies) is built on top of that profile.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .numerics import FOUR_PI, RadialGrid, integrate_uniform, quad_radial

#: (3/10)(3 pi^2)^{2/3}: kinetic constant for q = 2 spin states
C_TF = 0.3 * (3.0 * np.pi**2) ** (2.0 / 3.0)
#: prefactor of the semiclassical phase-space energy, 4 sqrt(2) / (15 pi^2)
C_SC = 4.0 * np.sqrt(2.0) / (15.0 * np.pi**2)

# exponent of the subleading decaying mode around the Sommerfeld solution 144/s^3
_SOMMERFELD_M = 0.5 * (np.sqrt(73.0) - 7.0)


class TFSolverError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class TFResidualError(ValueError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


# ---------------------------------------------------------------------------
# Universal screening function
# ---------------------------------------------------------------------------


def _shoot_rhs(t, y):
    # s = t^2 removes the 1/sqrt(s) singularity: dPhi/dt = 2 t w, dw/dt = 2 Phi^{3/2}
    phi, w = y
    return [2.0 * t * w, 2.0 * max(phi, 0.0) ** 1.5]


def _hits_zero(t, y):
    return y[0]


_hits_zero.terminal = True
_hits_zero.direction = -1


def _turns_up(t, y):
    return y[1]


_turns_up.terminal = True
_turns_up.direction = 1


def _shoot(slope, t_max=40.0):
    """+1: Phi turns upward (slope not steep enough); -1: Phi crosses zero."""
    sol = solve_ivp(_shoot_rhs, (0.0, t_max), [1.0, slope], method="DOP853",
                    rtol=1e-12, atol=1e-14, events=(_hits_zero, _turns_up))
    if sol.t_events[0].size:
        return -1, sol.t_events[0][0] ** 2
    if sol.t_events[1].size:
        return +1, sol.t_events[1][0] ** 2
    return 0, t_max**2


def shoot_initial_slope(tolerance=1e-10, bracket=(-2.0, -1.0)):
    """Bisect the initial slope of the TF equation.

    Returns (midpoint, lo, hi, trace).  ``trace`` records (slope, outcome,
    s at which the outcome was decided) for every shot.
    """
    lo, hi = bracket
    trace = []
    for slope in (lo, hi):
        trace.append((slope, *_shoot(slope)))
    if not (trace[0][1] < 0 and trace[1][1] > 0):
        raise TFSolverError(
            f"initial slope not bracketed by [{lo}, {hi}]", trace)
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        outcome, s_dec = _shoot(mid)
        trace.append((mid, outcome, s_dec))
        if outcome < 0:
            lo = mid
        elif outcome > 0:
            hi = mid
        else:
            # neither event before the integration cap: as close as double
            # precision shooting can get
            lo = hi = mid
            break
    return 0.5 * (lo + hi), lo, hi, trace


def _inward_rhs(x, y):
    # x = ln s, y = (Psi, s Psi')
    s = np.exp(x)
    return [y[1], y[1] + (s * max(y[0], 0.0)) ** 1.5]


_FAMILY_A = -13.27
_FAMILY_S_FAR = 1e6


def _decaying_family(a=_FAMILY_A, s_far=_FAMILY_S_FAR, s_near=1e-12, rtol=1e-12):
    """Integrate the decaying solution Psi ~ 144 s^-3 (1 + a s^-m) inward.

    Returns (Psi(0), Psi'(0), dense solution in ln s).  Psi is a TF solution
    with Psi(0) != 1 in general; the scale invariance lam^3 Psi(lam s)
    maps it onto Phi.
    """
    m = _SOMMERFELD_M
    p0 = 144.0 / s_far**3 * (1.0 + a * s_far**-m)
    q0 = 144.0 / s_far**3 * (-3.0 + a * (-3.0 - m) * s_far**-m)
    sol = solve_ivp(_inward_rhs, (np.log(s_far), np.log(s_near)), [p0, q0],
                    method="DOP853", rtol=rtol, atol=1e-300, dense_output=True)
    if not sol.success:
        raise TFSolverError(f"inward integration failed: {sol.message}")
    P, q = sol.y[:, -1]
    # near the origin Psi = P0 + B s + (4/3) P0^{3/2} s^{3/2} + ...
    P0 = P
    for _ in range(6):
        B = (q - 2.0 * P0**1.5 * s_near**1.5) / s_near
        P0 = P - B * s_near - 4.0 / 3.0 * P0**1.5 * s_near**1.5
    return P0, B, sol


@dataclass(frozen=True)
class UniversalTFSolution:
    s_grid: np.ndarray
    phi: np.ndarray
    initial_slope: float
    far_field_exponent: float
    slope_bracket: tuple = (np.nan, np.nan)
    # Phi(s) = lam^3 Psi(lam s) with Psi the dense inward solution
    _scale: float = field(default=1.0, repr=False)
    _dense: object = field(default=None, repr=False, compare=False)
    _origin: tuple = field(default=(1.0, np.nan), repr=False)
    _far: tuple = field(default=(np.inf, 0.0), repr=False)

    @property
    def s_max(self) -> float:
        return float(self.s_grid[-1])

    def _eval(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s < 0):
            raise ValueError("Phi is defined for s >= 0")
        lam = self._scale
        x = lam * s
        phi = np.empty_like(s)
        dphi = np.empty_like(s)
        P0, B = self._origin
        tiny = x < 1e-10
        if tiny.any():
            xs = x[tiny]
            phi[tiny] = P0 + B * xs + 4.0 / 3.0 * P0**1.5 * xs**1.5
            dphi[tiny] = B + 2.0 * P0**1.5 * np.sqrt(xs)
        x_far, a = self._far
        far = x > x_far
        if far.any():
            xf = x[far]
            m = _SOMMERFELD_M
            phi[far] = 144.0 / xf**3 * (1.0 + a * xf**-m)
            dphi[far] = 144.0 / xf**4 * (-3.0 + a * (-3.0 - m) * xf**-m)
        big = ~(tiny | far)
        if big.any():
            y = self._dense(np.log(x[big]))
            phi[big] = y[0]
            dphi[big] = y[1] / x[big]
        return lam**3 * phi, lam**4 * dphi

    def __call__(self, s):
        return self._eval(s)[0]

    def derivative(self, s):
        return self._eval(s)[1]

    def tail_mass(self, s):
        """int_s^inf Phi''(t) t dt = Phi(s) - s Phi'(s): charge (in units of Z)
        outside radius s*b."""
        phi, dphi = self._eval(s)
        return phi - np.asarray(s) * dphi

    def residual(self, s=None):
        """Relative residual |Phi'' - Phi^{3/2}/sqrt(s)| / (Phi^{3/2}/sqrt(s))
        on interior nodes, with Phi'' taken
        from the ODE solution's own derivative by central differences."""
        s = self.s_grid[1:-1] if s is None else np.asarray(s, dtype=float)
        d = 1e-4 * s
        d2 = (self.derivative(s + d) - self.derivative(s - d)) / (2.0 * d)
        rhs = self(s) ** 1.5 / np.sqrt(s)
        return np.abs(d2 - rhs) / rhs


def _far_field_exponent(sol_fn, s_max):
    """Exponent k in Phi ~ C s^-k (1 + a s^-m) fitted on the last decade."""
    s = np.geomspace(s_max / 10.0, s_max, 64)
    phi = sol_fn(s)
    m = _SOMMERFELD_M

    def resid(p):
        C, k, a = p
        return C * s**-k * (1.0 + a * s**-m) / phi - 1.0

    fit = least_squares(resid, x0=[144.0, 3.0, -10.0],
                        bounds=([1.0, 1.0, -100.0], [1e4, 6.0, 100.0]))
    return float(fit.x[1])


def solve_tf_ode(tolerance: float = 1e-8, s_max: float = 1e4) -> UniversalTFSolution:
    """Solve the universal Thomas-Fermi equation.

    The initial slope is found by bisection shooting on [-2, -1] until the
    bracket is narrower than ``tolerance``.  The tabulated profile itself
    comes from the decaying solution integrated inward from the far field
    and rescaled to Phi(0) = 1; forward shooting is exponentially unstable
    at large s, inward integration is not.  The two slopes are required to
    agree within the bracket width.

    ``s_max`` bounds the tabulated range.  The far-field exponent is fitted
    on its last decade, where the subleading s^-m correction is already
    small; on [5, 50] it is not and no three-term fit is meaningful.
    """
    if not (0.0 < tolerance <= 1e-3):
        raise ValueError(f"tolerance must lie in (0, 1e-3], got {tolerance}")
    if not (10.0 <= s_max <= 1e5):
        raise ValueError(f"s_max must lie in [10, 1e5], got {s_max}")
    slope, lo, hi, trace = shoot_initial_slope(tolerance)

    P0, B, dense = _decaying_family()
    lam = P0 ** (-1.0 / 3.0)
    inward_slope = lam**4 * B
    if abs(inward_slope - slope) > max(tolerance, 1e-9):
        raise TFSolverError(
            f"shooting slope {slope:.12f} and inward slope {inward_slope:.12f} disagree",
            trace)

    s_grid = np.concatenate([[0.0], np.geomspace(1e-6, s_max, 2000)])
    far = (_FAMILY_S_FAR, _FAMILY_A)
    tmp = UniversalTFSolution(s_grid, s_grid, slope, np.nan, (lo, hi),
                              lam, dense.sol, (P0, B), far)
    phi = tmp(s_grid)
    phi[0] = 1.0
    k = _far_field_exponent(tmp, s_max)
    out = UniversalTFSolution(s_grid, phi, slope, k, (lo, hi), lam, dense.sol,
                              (P0, B), far)
    if not (np.all(phi > 0) and np.all(np.diff(phi) < 0)):
        raise TFSolverError("profile is not positive and decreasing", trace)
    return out


# ---------------------------------------------------------------------------
# Atom
# ---------------------------------------------------------------------------


def tf_length_scale(Z: float) -> float:
    """b such that V = (Z/r) Phi(r/b) solves the TF equation.

    Poisson's equation for V = Z/r - rho * |x|^-1 reads
    (1/r)(rV)'' = 4 pi rho, and the Euler-Lagrange relation gives
    rho = (2V)^{3/2} / (3 pi^2).  Substituting rV = Z Phi(r/b) yields
    Phi'' = b^{3/2} Z^{1/2} 2^{7/2}/(3 pi) Phi^{3/2}/sqrt(s),
    so b^{3/2} = 3 pi / (2^{7/2} Z^{1/2}).
    """
    return (3.0 * np.pi / (2.0**3.5 * np.sqrt(Z))) ** (2.0 / 3.0)


def density_from_potential(V):
    """rho = (2 V_+)^{3/2} / (3 pi^2), the Euler-Lagrange relation inverted."""
    V = np.maximum(np.asarray(V, dtype=float), 0.0)
    return (2.0 * V) ** 1.5 / (3.0 * np.pi**2)


def tf_grid(Z: float, points_per_b: int = 400, s_max: float = 50.0) -> RadialGrid:
    """Uniform grid with spacing b/points_per_b out to s_max * b."""
    b = tf_length_scale(Z)
    return RadialGrid.from_extent(s_max * b, b / points_per_b)


@dataclass(frozen=True)
class TFAtom:
    Z: float
    grid: RadialGrid
    rho: np.ndarray
    v_tf: np.ndarray
    e_tf: float
    d_self: float
    b: float = np.nan
    el_residual: float = np.nan
    mass: float = np.nan
    # charge and 4 pi int rho r dr beyond the last grid point (analytic)
    tail_mass: float = 0.0
    tail_moment: float = 0.0


def coulomb_potential(f, grid: RadialGrid, outer_moment: float = 0.0) -> np.ndarray:
    """phi_f(r) = 4 pi [(1/r) int_0^r f s^2 ds + int_r^inf f s ds].

    ``outer_moment`` is 4 pi int_{r_n}^inf f s ds for mass beyond the grid.
    """
    f = np.asarray(f, dtype=float)
    r = grid.r
    h = grid.spacing
    inner = integrate_uniform(FOUR_PI * f * r * r, h, cumulative=True)
    outer_run = integrate_uniform(FOUR_PI * f * r, h, cumulative=True)
    outer = outer_run[-1] - outer_run + outer_moment
    return inner / r + outer


def coulomb_energy(f, grid: RadialGrid, outer_mass: float = 0.0,
                   outer_moment: float = 0.0) -> float:
    """D(f) = 1/2 int int f(x) f(y) / |x - y| for radial f.

    ``outer_mass``/``outer_moment`` describe charge beyond the grid; they
    add the interaction between that charge and the sampled part (the
    self-energy of the exterior charge itself is not included).
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n_points,):
        raise ValueError(
            f"sample length {f.shape} does not match grid with {grid.n_points} points")
    if not np.any(f):
        return 0.0
    pot = coulomb_potential(f, grid)
    d = 0.5 * quad_radial(f * pot, grid)
    if outer_moment:
        d += quad_radial(f, grid) * outer_moment
    return float(d)


def tf_energy(rho, Z: float, grid: RadialGrid, tail_mass: float = 0.0,
              tail_moment: float = 0.0) -> float:
    """(3/10)(3 pi^2)^{2/3} int rho^{5/3} - int Z rho / r + D(rho).

    The optional tail terms account for charge outside the grid through the
    nuclear attraction (-Z * moment) and the cross term in D.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.n_points,):
        raise ValueError(
            f"sample length {rho.shape} does not match grid with {grid.n_points} points")
    if np.any(rho < 0):
        i = int(np.argmin(rho))
        raise ValueError(f"negative density {rho[i]:.3e} at r = {grid.r[i]:.4g}")
    if not np.any(rho):
        return 0.0
    r = grid.r
    kin = C_TF * quad_radial(rho ** (5.0 / 3.0), grid)
    att = Z * quad_radial(rho / r, grid) + Z * tail_moment
    rep = coulomb_energy(rho, grid, tail_mass, tail_moment)
    return float(kin - att + rep)


def el_residual(V, rho, Z, grid: RadialGrid, tail_moment=0.0, interior=None):
    """Relative residual |V - (Z/r - phi_rho)| / V on interior nodes.

    With rho obtained from V through the Euler-Lagrange relation this is the
    self-consistency test that pins the length scale.
    """
    r = grid.r
    pot = coulomb_potential(rho, grid, tail_moment)
    res = np.abs(V - (Z / r - pot)) / V
    if interior is None:
        interior = slice(2, -2)
    return res[interior]


def tf_atom(Z: float, grid: Optional[RadialGrid] = None,
            universal: Optional[UniversalTFSolution] = None,
            residual_tol: float = 1e-3) -> TFAtom:
    if not (np.isfinite(Z) and Z > 0):
        raise ValueError(f"Z must be positive, got {Z}")
    if universal is None:
        universal = solve_tf_ode()
    b = tf_length_scale(Z)
    if grid is None:
        grid = tf_grid(Z)
    r = grid.r
    s = r / b
    phi = universal(s)
    V = Z / r * phi
    rho = density_from_potential(V)
    s_end = grid.r_last / b
    tail_mass = Z * float(universal.tail_mass(s_end)[0])
    tail_moment = -Z * float(universal.derivative(s_end)[0]) / b

    res = el_residual(V, rho, Z, grid, tail_moment)
    worst = float(np.max(res))
    if worst > residual_tol:
        raise TFResidualError(
            f"Euler-Lagrange residual {worst:.3e} exceeds {residual_tol:.1e}; refine the grid",
            res)
    mass = quad_radial(rho, grid) + tail_mass
    e = tf_energy(rho, Z, grid, tail_mass, tail_moment)
    d = coulomb_energy(rho, grid, tail_mass, tail_moment)
    return TFAtom(Z=Z, grid=grid, rho=rho, v_tf=V, e_tf=e, d_self=d, b=b,
                  el_residual=worst, mass=mass, tail_mass=tail_mass,
                  tail_moment=tail_moment)


# ---------------------------------------------------------------------------
# Semiclassics
# ---------------------------------------------------------------------------


def sc_energy(V, weight, grid: RadialGrid) -> float:
    """-(4 sqrt 2 / 15 pi^2) int weight V_+^{5/2}.

    This is (2/(2 pi)^3) int int weight(x) (p^2/2 - V(x))_- dx dp with the
    momentum integral done in closed form.
    """
    V = np.asarray(V, dtype=float)
    w = np.asarray(weight, dtype=float)
    if np.any(w < 0):
        raise ValueError("weight must be nonnegative")
    vp = np.maximum(V, 0.0)
    if not np.any(vp * w):
        return 0.0
    return float(-C_SC * quad_radial(w * vp**2.5, grid))


def vtf_bound_constants(atom: TFAtom) -> dict:
    r = atom.grid.r
    V = atom.v_tf
    Z = atom.Z
    return {
        "sup_core": float(np.max(np.abs(V - Z / r)) * Z ** (-4.0 / 3.0)),
        "sup_rV_over_Z": float(np.max(r * V) / Z),
        "sup_r4V": float(np.max(r**4 * V)),
    }


@dataclass(frozen=True)
class SemiclassicalParams:
    z: tuple
    Z: float
    kappa: float
    h: float
    beta: float
    alpha: float
    critical: bool
    subcritical: bool

    @property
    def beta_over_h(self) -> float:
        return self.beta / self.h


def semiclassical_params(Z_total: float, z: Sequence[float], alpha: float) -> SemiclassicalParams:
    z = tuple(float(v) for v in np.atleast_1d(z))
    if not z or any(v <= 0 for v in z):
        raise ValueError("normalized charges must be positive")
    if abs(sum(z) - 1.0) > 1e-12:
        raise ValueError(f"normalized charges must sum to 1, got {sum(z)!r}")
    if Z_total <= 0:
        raise ValueError("total charge must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    kappa = min(2.0 / (np.pi * v) for v in z)
    h = np.sqrt(kappa) * Z_total ** (-1.0 / 3.0)
    beta = Z_total ** (2.0 / 3.0) * alpha / np.sqrt(kappa)
    coupling = max(Z_total * v * alpha for v in z)
    crit = abs(coupling - 2.0 / np.pi) <= 1e-12
    return SemiclassicalParams(z, float(Z_total), kappa, h, beta, float(alpha),
                               crit, coupling <= 2.0 / np.pi + 1e-12)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_atom_csv(atom: TFAtom, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "rho_tf", "v_tf"])
        for r, rho, v in zip(atom.grid.r, atom.rho, atom.v_tf):
            w.writerow([repr(float(r)), repr(float(rho)), repr(float(v))])


def atom_summary(atom: TFAtom, universal: UniversalTFSolution) -> dict:
    return {
        "Z": atom.Z,
        "E_tf": atom.e_tf,
        "D_self": atom.d_self,
        "slope": universal.initial_slope,
        "length_scale_b": atom.b,
        "el_residual": atom.el_residual,
        "mass": atom.mass,
        "grid": atom.grid.ident(),
    }
