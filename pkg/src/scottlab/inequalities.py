"""Matrix-level checks of the operator inequalities used for the Scott term:
the pull-out (operator Jensen) formula, the IMS localization identity, a
scalar monotonicity fact, and fitted constants for the Daubechies and
combined Daubechies-Lieb-Yau bounds in the radial, field-free setting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import RadialGrid, check_symmetric, eig_sym, matrix_function, quad_radial
from .radial import KineticModel, sum_channels

CRITICAL_COUPLING = 2.0 / np.pi


@dataclass
class InequalityReport:
    family: str
    cases: int
    worst_margin: float
    empirical_constant: float
    table: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.extra.get("passed", True))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "cases": self.cases,
            "worst_margin": self.worst_margin,
            "empirical_constant": self.empirical_constant,
            "table": self.table,
            "extra": self.extra,
        }


# ---------------------------------------------------------------------------
# Pull-out formula
# ---------------------------------------------------------------------------


def _psd_power(m, a):
    # PSD input; clip round-off negatives so that t^a is defined
    return matrix_function(m, lambda w: np.maximum(w, 0.0) ** a)


def _random_symmetric(rng, n):
    x = rng.standard_normal((n, n))
    return 0.5 * (x + x.T)


def random_resolution(rng, n, parts, shrink=0.9):
    """Symmetric S_1..S_parts with sum S_k^2 = 1.

    Each S_k (k < parts) is a random symmetric matrix scaled so that
    S_k^2 <= shrink * Q_k, where Q_k = 1 - sum_{j<k} S_j^2; the last one is
    Q^{1/2}.  The S_k generally do not commute.
    """
    if parts == 1:
        return [np.eye(n)]
    Q = np.eye(n)
    out = []
    for _ in range(parts - 1):
        w, v = eig_sym(Q)
        if w[0] <= 0:
            raise np.linalg.LinAlgError("remainder lost positivity")
        q_mhalf = (v / np.sqrt(w)) @ v.T
        X = _random_symmetric(rng, n)
        # largest eigenvalue of Q^-1/2 X^2 Q^-1/2
        top = np.linalg.eigvalsh(q_mhalf @ X @ X @ q_mhalf)[-1]
        S = X * np.sqrt(shrink * rng.uniform(0.2, 1.0) / top)
        out.append(S)
        Q = Q - S @ S
        Q = 0.5 * (Q + Q.T)
    out.append(_psd_power(Q, 0.5))
    return out


def pullout_test(n: int = 6, parts: int = 3, a: float = 0.5, trials: int = 1000,
                 seed: int = 42, tol: float = 1e-10) -> InequalityReport:
    """(sum S A S)^a >= sum S A^a S for symmetric S with sum S^2 = 1."""
    if not (1 <= n <= 8):
        raise ValueError("matrix order must lie in [1, 8]")
    if not (1 <= parts <= 5):
        raise ValueError("parts must lie in [1, 5]")
    if not (0.0 < a <= 1.0):
        raise ValueError("exponent must lie in (0, 1]")
    if trials < 1:
        raise ValueError("need at least one trial")
    worst = np.inf
    retries = 0
    table = []
    violations = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        while True:
            try:
                S = random_resolution(rng, n, parts)
            except np.linalg.LinAlgError:
                retries += 1
                continue
            defect = np.max(np.abs(sum(s @ s for s in S) - np.eye(n)))
            if defect <= 1e-12:
                break
            retries += 1
        A = []
        for _ in range(parts):
            # spectra log-uniform on [1e-3, 1e2]: t^a is not Lipschitz at 0, so
            # round-off in a (near) null space would masquerade as a violation
            q, _ = np.linalg.qr(rng.standard_normal((n, n)))
            lam = 10.0 ** rng.uniform(-3.0, 2.0, n)
            A.append((q * lam) @ q.T)
        lhs = _psd_power(sum(s @ x @ s for s, x in zip(S, A)), a)
        rhs = sum(s @ _psd_power(x, a) @ s for s, x in zip(S, A))
        diff = lhs - rhs
        scale = np.linalg.norm(lhs, 2)
        m = np.linalg.eigvalsh(0.5 * (diff + diff.T))[0] / max(scale, 1e-300)
        worst = min(worst, m)
        if m < -tol:
            violations += 1
        table.append({"trial": t, "margin": float(m), "defect": float(defect)})
    return InequalityReport(
        "pullout", trials, float(worst), np.nan, table,
        {"violations": violations, "retries": retries, "tolerance": tol,
         "n": n, "parts": parts, "a": a, "seed": seed, "passed": violations == 0})


# ---------------------------------------------------------------------------
# IMS localization
# ---------------------------------------------------------------------------


def ims_identity_test(h: np.ndarray, partition: Sequence) -> float:
    """Spectral norm of sum theta h theta + 1/2 sum [theta,[theta,h]] - h.

    ``partition`` holds the diagonals of theta_j; sum theta_j^2 must equal
    1 to 1e-12.
    """
    h = check_symmetric(np.asarray(h, dtype=float))
    thetas = [np.asarray(t, dtype=float) for t in partition]
    if any(t.shape != (h.shape[0],) for t in thetas):
        raise ValueError("partition diagonals do not match the matrix")
    defect = np.max(np.abs(sum(t * t for t in thetas) - 1.0))
    if defect > 1e-12:
        raise ValueError(f"partition defect {defect:.3e} exceeds 1e-12")
    loc = np.zeros_like(h)
    dc = np.zeros_like(h)
    for t in thetas:
        T = np.diag(t)
        loc += T @ h @ T
        c = T @ h - h @ T
        dc += T @ c - c @ T
    res = loc + 0.5 * dc - h
    return float(np.linalg.norm(res, 2))


def smooth_partition(grid: RadialGrid, R: float, profile=None):
    """Two-part radial partition (theta, sqrt(1 - theta^2)) at scale R."""
    from .numerics import CutoffProfile

    profile = profile or CutoffProfile()
    t = grid.r / R
    return [profile.theta(t), profile.partner(t)]


# ---------------------------------------------------------------------------
# Scalar monotonicity
# ---------------------------------------------------------------------------


def shifted_root(a, xi):
    """sqrt(a^2 + xi^2) - xi without cancellation for large xi."""
    a2 = np.asarray(a, dtype=float) ** 2
    xi = np.asarray(xi, dtype=float)
    den = np.sqrt(a2 + xi * xi) + xi
    # a = xi = 0 is the only zero denominator, where the value is 0
    return np.divide(a2, den, out=np.zeros(np.broadcast(a2, den).shape), where=den > 0)


def monotone_shift_test(samples: int = 100_000, seed: int = 7, tol: float = 1e-14):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(samples) * 10.0 ** rng.uniform(-3, 3, samples)
    x = 10.0 ** rng.uniform(-4, 4, (2, samples))
    x[:, rng.random(samples) < 0.05] *= 0.0  # include xi_1 = 0
    lo = np.minimum(x[0], x[1])
    hi = np.maximum(x[0], x[1])
    same = lo == hi
    hi[same] = lo[same] + 1.0
    f1 = shifted_root(a, lo)
    f2 = shifted_root(a, hi)
    slack = f1 - f2
    bad = slack < -tol
    return InequalityReport(
        "monotone_shift", samples, float(np.min(slack)), np.nan, [],
        {"violations": int(bad.sum()), "tolerance": tol, "seed": seed,
         "passed": not bad.any()})


# ---------------------------------------------------------------------------
# Fitted constants
# ---------------------------------------------------------------------------


def gaussian_well(depth: float, width: float = 1.0):
    return lambda r: depth * np.exp(-(r / width) ** 2)


def _lp(U, grid, p):
    return quad_radial(np.maximum(U, 0.0) ** p, grid)


def _trace_no_cutoff(model, potential, grid, tol):
    return sum_channels(model, potential, np.ones(grid.n_points), grid, tol).total


def daubechies_constant(alpha: float, wells: Sequence, spacings=(0.05, 0.025, 0.0125),
                        box: float = 10.0, ell_tol: float = 1e-7) -> InequalityReport:
    """Smallest C with tr[sqrt(a^-2 p^2 + a^-4) - a^-2 - U]_- >= -C (int U^5/2 + a^3 int U^4)
    on the battery, per grid; drift is the ratio of extreme constants."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    model = KineticModel.chandrasekhar(alpha)
    per_grid = []
    table = []
    for h in spacings:
        grid = RadialGrid.from_extent(box, h)
        ratios = []
        for k, U in enumerate(wells):
            u = U(grid.r) if callable(U) else np.asarray(U, dtype=float)
            if np.any(u < 0):
                raise ValueError("wells must be nonnegative")
            lhs = _trace_no_cutoff(model, -u, grid, ell_tol)
            rhs = _lp(u, grid, 2.5) + alpha**3 * _lp(u, grid, 4.0)
            ratio = 0.0 if lhs == 0.0 else -lhs / rhs
            ratios.append(ratio)
            table.append({"spacing": h, "case": k, "lhs": lhs, "rhs": rhs, "ratio": ratio})
        per_grid.append(max(ratios))
    C = per_grid[-1]
    positive = [c for c in per_grid if c > 0]
    drift = max(positive) / min(positive) if positive else 1.0
    # margin of the finest grid relative to its own fitted constant
    fine = [row for row in table if row["spacing"] == spacings[-1]]
    margin = min((row["lhs"] + C * row["rhs"]) / (C * row["rhs"]) if row["rhs"] > 0 else 0.0
                 for row in fine)
    return InequalityReport(
        "daubechies", len(wells), float(margin), float(C), table,
        {"per_grid_constant": per_grid, "drift": float(drift), "alpha": alpha,
         "stable": bool(np.isfinite(C) and drift <= 2.0)})


def hypothesis_guard(nu: float, alpha: float, centers=((0.0, 0.0, 0.0),)):
    """Check the coupling and separation hypotheses for one case; returns the log entry."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    M = centers.shape[0]
    sep = np.inf
    for i in range(M):
        for j in range(i + 1, M):
            sep = min(sep, float(np.linalg.norm(centers[i] - centers[j])))
    coupling = nu * alpha
    if coupling > CRITICAL_COUPLING + 1e-12:
        raise ValueError(f"nu*alpha = {coupling:.6g} exceeds 2/pi")
    if M > 1 and not sep > (2.0 + 2.0 * np.pi) * alpha:
        raise ValueError(f"centers closer than (2 + 2 pi) alpha: {sep:.4g}")
    return {"nu_alpha": coupling, "M": M, "separation": sep}


def mcdly_constant(alpha: float, nu_alphas: Sequence[float], wells: Sequence,
                   refinements=(8, 16, 32), box: float = 10.0,
                   ell_tol: float = 1e-7) -> InequalityReport:
    """Fitted C for
        tr[T_alpha - (nu/r) 1_{r<alpha} - U]_- >= -C (nu^5/2 alpha^1/2 + int U^5/2 + alpha^3 int U^4)
    over the battery (nu*alpha) x wells, on grids with spacing alpha/k.

    For couplings nu*alpha <= 1/64 the constant term is dropped and a
    separate constant is fitted; it must stay finite, which in particular
    requires a zero trace when U = 0.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    model = KineticModel.chandrasekhar(alpha)
    guards = [hypothesis_guard(na / alpha, alpha) for na in nu_alphas]
    table = []
    full_c, small_c = [], []
    for k in refinements:
        grid = RadialGrid.from_extent(box, alpha / k)
        r = grid.r
        cf, cs = 0.0, 0.0
        for g, na in zip(guards, nu_alphas):
            nu = na / alpha
            coul = np.where(r < alpha, nu / r, 0.0)
            for j, U in enumerate(wells):
                u = U(r) if callable(U) else np.asarray(U, dtype=float)
                lhs = _trace_no_cutoff(model, -coul - u, grid, ell_tol)
                t0 = nu**2.5 * alpha**0.5
                tu = _lp(u, grid, 2.5) + alpha**3 * _lp(u, grid, 4.0)
                rf = 0.0 if lhs == 0.0 else -lhs / (t0 + tu)
                cf = max(cf, rf)
                row = {"refinement": k, "nu_alpha": na, "well": j, "lhs": lhs,
                       "constant_term": t0, "well_terms": tu, "ratio": rf, **g}
                if na <= 1.0 / 64.0:
                    rs = 0.0 if lhs == 0.0 else (np.inf if tu == 0.0 else -lhs / tu)
                    cs = max(cs, rs)
                    row["ratio_without_constant"] = rs
                table.append(row)
        full_c.append(cf)
        small_c.append(cs)
    C = full_c[-1]
    pos = [c for c in full_c if c > 0]
    drift = max(pos) / min(pos) if pos else 1.0
    spos = [c for c in small_c if c > 0]
    sdrift = max(spos) / min(spos) if spos else 1.0
    no_const_ok = bool(all(np.isfinite(small_c)) and sdrift <= 2.0)
    fine = [row for row in table if row["refinement"] == refinements[-1]]
    margin = min(
        (row["lhs"] + C * (row["constant_term"] + row["well_terms"]))
        / (C * (row["constant_term"] + row["well_terms"]))
        if C > 0 and row["constant_term"] + row["well_terms"] > 0 else 0.0
        for row in fine)
    return InequalityReport(
        "mcdly", len(nu_alphas) * len(wells), float(margin), float(C), table,
        {"per_grid_constant": full_c, "drift": float(drift),
         "small_coupling_constant": small_c, "small_coupling_drift": float(sdrift),
         "no_constant_term_ok": no_const_ok, "alpha": alpha,
         "stable": bool(np.isfinite(C) and drift <= 2.0)})


# ---------------------------------------------------------------------------
# Relativistic Hardy ladder
# ---------------------------------------------------------------------------


def hardy_ladder(couplings=(CRITICAL_COUPLING, 0.7), sizes=(2047, 4095, 8191),
                 length: float = 1.0, floor: float = -0.01,
                 growth: float = 4.0) -> InequalityReport:
    """Lowest eigenvalue of sqrt(-d^2/dr^2) - c/r (l = 0) on a refinement ladder.

    For c <= 2/pi every grid must stay above ``floor`` and the per-step
    decrements must not grow (no divergence).  For c > 2/pi the expected
    signature is a drop of at least ``growth`` times in |lambda_min| from the
    coarsest to the finest grid; finding it counts as a pass.
    """
    from .radial import hardy_min_eig

    sizes = sorted(int(n) for n in sizes)
    if len(sizes) < 2:
        raise ValueError("a ladder needs at least two grids")
    grids = [RadialGrid(length / (n + 1), n) for n in sizes]
    table = []
    ok_all = True
    worst = np.inf
    for c in couplings:
        vals = hardy_min_eig(float(c), grids)
        dec = [a - b for a, b in zip(vals, vals[1:])]
        if c <= CRITICAL_COUPLING + 1e-12:
            regime = "subcritical"
            bounded = min(vals) >= floor
            settling = all(d2 <= d1 + 1e-12 for d1, d2 in zip(dec, dec[1:]))
            ok = bool(bounded and settling)
            margin = min(vals) - floor
            ratio = np.nan
        else:
            regime = "supercritical"
            ratio = abs(vals[-1]) / max(abs(vals[0]), 1e-300)
            ok = bool(vals[-1] < 0 and ratio >= growth)
            margin = ratio - growth
        worst = min(worst, margin)
        ok_all &= ok
        table.append({"coupling": float(c), "regime": regime, "sizes": sizes,
                      "spacings": [g.spacing for g in grids], "min_eig": vals,
                      "growth": ratio, "passed": ok})
    return InequalityReport("hardy", len(table), float(worst), np.nan, table,
                            {"floor": floor, "growth_required": growth, "length": length,
                             "passed": bool(ok_all)})
