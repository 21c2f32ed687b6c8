"""Finite-R estimates of the Scott function S_2(alpha).

The localized trace of the hydrogen-like operator exceeds its semiclassical
counterpart I_R by 2 S_2(alpha) in the limit R -> infinity:

    S_2(alpha) = lim_R ( tr[phi_R (T_alpha - 1/|x| - D R^-2 chi_R) phi_R]_- - I_R ) / 2,

normalized so that S_2(0) = 1/4.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .numerics import CutoffProfile, RadialGrid, quad_radial
from .radial import KineticModel, sum_channels_multi
from .tf import C_SC

CRITICAL_ALPHA = 2.0 / np.pi


def i_r(profile: CutoffProfile, R: float, grid: RadialGrid) -> float:
    """Semiclassical energy of the localized hydrogen problem,
    -(4 sqrt 2/15 pi^2) int phi_R^2 |x|^{-5/2} dx."""
    if R <= 0:
        raise ValueError("R must be positive")
    if grid.r_last < profile.support * R - 1e-12:
        raise ValueError(
            f"grid ends at {grid.r_last:.4g}, the profile support reaches {profile.support * R:.4g}")
    r = grid.r
    w = profile(r, R) ** 2
    if not np.any(w):
        return 0.0
    return float(-C_SC * quad_radial(w * r**-2.5, grid))


@dataclass(frozen=True)
class ScottConfig:
    """Numerical settings for the localized traces.

    spacing: radial step; None picks min(0.05, alpha/8).
    margin: distance between the profile support and the Dirichlet wall.
    """

    spacing: Optional[float] = None
    margin: float = 8.0
    ell_truncation_tol: float = 1e-7
    max_ell: int = 200

    def spacing_for(self, alpha: float) -> float:
        if self.spacing is not None:
            return self.spacing
        return 0.05 if alpha == 0 else min(0.05, alpha / 8.0)


@dataclass
class ScottPoint:
    R: float
    trace: float
    i_r: float
    s2: float
    ell_max: int
    tail_estimate: float
    channels: list = field(default_factory=list, repr=False)  # (ell, contribution, negatives)


@dataclass
class ScottEstimate:
    """Scott estimate for one alpha over an R schedule.

    ``trace_value``, ``i_r_value`` and ``s2_estimate`` refer to the largest R.
    ``extrapolated`` is the constant of a + b R^-1/2 + c R^-1 through the
    three largest radii (fewer if the schedule is shorter); ``err_bar`` is
    the last successive difference of the raw estimates.
    """

    alpha: float
    R: float
    D_coef: float
    lambda_field: float
    trace_value: float
    i_r_value: float
    s2_estimate: float
    extrapolated: float
    err_bar: float
    history: list = field(default_factory=list)
    profile: str = "smoothstep"
    spacing: float = np.nan
    margin: float = np.nan

    @property
    def successive_differences(self):
        s = [p.s2 for p in self.history]
        return list(np.abs(np.diff(s)))


def extrapolate_s2(Rs, s2, points: int = 3):
    """Constant term of s2(R) = a + b R^-1/2 + c R^-1 + ... interpolated
    through the ``points`` largest radii (one power of R^-1/2 per point).

    The smallest radii are pre-asymptotic (successive differences are not
    yet shrinking there), so only the tail of the schedule is used.
    """
    order = np.argsort(np.asarray(Rs, dtype=float))
    Rs = np.asarray(Rs, dtype=float)[order][-points:]
    s2 = np.asarray(s2, dtype=float)[order][-points:]
    if Rs.size == 1:
        return float(s2[0])
    A = np.vander(Rs**-0.5, Rs.size, increasing=True)
    return float(np.linalg.solve(A, s2)[0])


def _check_alpha(alpha):
    if not (0.0 <= alpha <= CRITICAL_ALPHA + 1e-12):
        raise ValueError(f"alpha must lie in [0, 2/pi], got {alpha}")


def scott_traces(alphas: Sequence[float], R: float, D_coef: float = 0.0,
                 profile: Optional[CutoffProfile] = None,
                 config: ScottConfig = ScottConfig(), spacing: Optional[float] = None):
    """Localized traces for several alphas at one R on a common grid.

    Returns (list of LocalizedTraceResult, grid).  Sharing the grid keeps
    the alpha-monotonicity exact: f_alpha(t) decreases in alpha for every t.
    """
    profile = profile or CutoffProfile()
    if R < 4:
        raise ValueError("R must be at least 4")
    h = spacing if spacing is not None else min(config.spacing_for(a) for a in alphas)
    for a in alphas:
        _check_alpha(a)
        if a > 0 and h > a / 8.0 + 1e-15:
            raise ValueError(
                f"spacing {h:.4g} does not resolve alpha = {a:.4g}; need <= {a / 8:.4g}")
    grid = RadialGrid.from_extent(profile.support * R + config.margin, h)
    r = grid.r
    pot = -1.0 / r
    if D_coef:
        # chi_R: indicator of the profile support
        pot = pot - D_coef / R**2 * (r <= profile.support * R)
    phi = profile(r, R)
    models = [KineticModel.for_alpha(a) for a in alphas]
    res = sum_channels_multi(models, pot, phi, grid, config.ell_truncation_tol,
                             config.max_ell)
    return res, grid


def scott_estimate(alpha: float, R, D_coef: float = 0.0,
                   profile: Optional[CutoffProfile] = None,
                   config: ScottConfig = ScottConfig(), lambda_field: float = np.inf):
    """S_2 estimate at one alpha; ``R`` may be a single radius or a schedule."""
    return scott_estimates([alpha], R, D_coef, profile, config, lambda_field)[0]


def scott_estimates(alphas: Sequence[float], R, D_coef: float = 0.0,
                    profile: Optional[CutoffProfile] = None,
                    config: ScottConfig = ScottConfig(), lambda_field: float = np.inf,
                    spacing: Optional[float] = None):
    profile = profile or CutoffProfile()
    Rs = sorted(np.atleast_1d(R).astype(float))
    if D_coef < 0:
        raise ValueError("well coefficient must be nonnegative")
    alphas = [float(a) for a in alphas]
    h = spacing if spacing is not None else min(config.spacing_for(a) for a in alphas)
    hist = [[] for _ in alphas]
    for Rv in Rs:
        res, grid = scott_traces(alphas, Rv, D_coef, profile, config, spacing=h)
        ir = i_r(profile, Rv, grid)
        for k, tr in enumerate(res):
            hist[k].append(ScottPoint(Rv, tr.total, ir, 0.5 * (tr.total - ir),
                                      tr.ell_max_used, tr.tail_estimate,
                                      list(tr.csv_rows())))
    out = []
    for a, hs in zip(alphas, hist):
        s2 = [p.s2 for p in hs]
        err = abs(s2[-1] - s2[-2]) if len(s2) > 1 else np.nan
        out.append(ScottEstimate(
            alpha=a, R=Rs[-1], D_coef=D_coef, lambda_field=lambda_field,
            trace_value=hs[-1].trace, i_r_value=hs[-1].i_r, s2_estimate=s2[-1],
            extrapolated=extrapolate_s2(Rs, s2), err_bar=err, history=hs,
            profile=profile.name, spacing=h, margin=config.margin))
    return out


@dataclass
class ScottTable:
    entries: list
    monotone: bool
    worst_increase: float
    profile_check: dict = field(default_factory=dict)
    tolerance: float = 0.01
    spacing_check: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return not self.monotone or not self.profile_check.get("ok", True)

    def rows(self):
        for e in self.entries:
            for p in e.history:
                yield (e.alpha, p.R, p.trace, p.i_r, p.s2, e.err_bar, p.ell_max,
                       p.tail_estimate)


SCOTT_CSV_COLUMNS = ("alpha", "R", "trace", "I_R", "s2_estimate", "err_bar", "ell_max",
                     "tail_estimate")


def scott_table(alphas: Sequence[float], R_schedule, profile: Optional[CutoffProfile] = None,
                config: ScottConfig = ScottConfig(), alternate: Optional[CutoffProfile] = None,
                check_alphas: Sequence[float] = (), tolerance: float = 0.01,
                profile_tolerance: float = 0.02, D_coef: float = 0.0,
                spacing_check: bool = False) -> ScottTable:
    """Estimates over an ascending list of alphas on one common grid.

    Monotonicity is judged on the extrapolated values.  When ``alternate`` is
    given, ``check_alphas`` are recomputed with it and compared.  With
    ``spacing_check`` the largest alpha is recomputed at the smallest R with
    half the spacing; the shift is reported, not judged (near alpha = 2/pi
    the core is resolved only slowly).
    """
    alphas = [float(a) for a in alphas]
    if alphas != sorted(alphas):
        raise ValueError("alphas must be sorted ascending")
    profile = profile or CutoffProfile()
    est = scott_estimates(alphas, R_schedule, D_coef, profile, config)
    vals = [e.extrapolated for e in est]
    inc = max([b - a for a, b in zip(vals, vals[1:])] + [-np.inf])
    monotone = bool(inc <= tolerance)
    check = {}
    if alternate is not None and check_alphas:
        by_alpha = {e.alpha: e for e in est}
        missing = [a for a in check_alphas if float(a) not in by_alpha]
        if missing:
            raise ValueError(f"profile-check alphas {missing} are not in the table")
        alt = scott_estimates([float(a) for a in check_alphas], R_schedule, D_coef, alternate,
                              config, spacing=est[0].spacing)
        diffs = {a.alpha: abs(a.extrapolated - by_alpha[a.alpha].extrapolated) for a in alt}
        check = {"profile": alternate.name, "differences": diffs,
                 "estimates": {a.alpha: a.extrapolated for a in alt},
                 "ok": bool(max(diffs.values()) <= profile_tolerance)}
    sc = {}
    if spacing_check:
        top = est[-1]
        R0 = top.history[0].R
        fine = scott_estimates([top.alpha], R0, D_coef, profile, config,
                               spacing=0.5 * top.spacing)[0]
        sc = {"alpha": top.alpha, "R": R0, "spacing": top.spacing,
              "s2": top.history[0].s2, "s2_half_spacing": fine.s2_estimate,
              "shift": fine.s2_estimate - top.history[0].s2}
    return ScottTable(est, monotone, float(inc), check, tolerance, sc)


def write_scott_csv(estimates, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCOTT_CSV_COLUMNS)
        for e in estimates:
            for p in e.history:
                w.writerow([repr(e.alpha), repr(p.R), repr(p.trace), repr(p.i_r),
                            repr(p.s2), repr(e.err_bar), p.ell_max, repr(p.tail_estimate)])
