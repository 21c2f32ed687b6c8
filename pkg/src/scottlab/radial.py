"""Channel-by-channel discretization of rotation-invariant operators.

A radial potential and a radial cutoff commute with angular momentum, so
tr[phi (T - V) phi]_- splits into l-channels with multiplicity 2(2l+1).
Each channel acts on u = r psi on a uniform Dirichlet grid; the kinetic
symbol is applied to the full channel Laplacian -d^2/dr^2 + l(l+1)/r^2
by spectral calculus.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, eigsh

from .numerics import (
    RadialGrid,
    chandrasekhar_symbol,
    check_symmetric,
    eig_sym,
    matrix_function,
    negative_part_sum,
    richardson,
)

MAX_CHANNEL_DIM = 16384


class ChannelConvergenceError(RuntimeError):
    def __init__(self, msg, per_ell):
        super().__init__(msg)
        self.per_ell = per_ell


# ---------------------------------------------------------------------------
# Kinetic models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KineticModel:
    """Kinetic symbol f(t) applied to t = p^2.

    kind is ``nonrelativistic`` (t/2), ``massless`` (sqrt t) or
    ``chandrasekhar`` (sqrt(alpha^-2 t + alpha^-4) - alpha^-2).
    """

    kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("nonrelativistic", "massless", "chandrasekhar"):
            raise ValueError(f"unknown kinetic model {self.kind!r}")
        if self.kind == "chandrasekhar" and not self.alpha > 0:
            raise ValueError("the chandrasekhar model needs alpha > 0")

    @classmethod
    def nonrelativistic(cls):
        return cls("nonrelativistic")

    @classmethod
    def massless(cls):
        return cls("massless")

    @classmethod
    def chandrasekhar(cls, alpha):
        return cls("chandrasekhar", float(alpha))

    @classmethod
    def for_alpha(cls, alpha):
        """alpha = 0 is the nonrelativistic limit of the chandrasekhar family."""
        return cls.nonrelativistic() if alpha == 0 else cls.chandrasekhar(alpha)

    def symbol(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "nonrelativistic":
            return 0.5 * t
        if self.kind == "massless":
            return np.sqrt(t)
        return chandrasekhar_symbol(t, self.alpha)

    __call__ = symbol

    @property
    def label(self) -> str:
        if self.kind == "chandrasekhar":
            return f"chandrasekhar(alpha={self.alpha:.6g})"
        return self.kind


# ---------------------------------------------------------------------------
# Channel operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelOperator:
    ell: int
    grid: RadialGrid
    diag: np.ndarray = field(repr=False)  # kinetic diagonal
    offdiag: np.ndarray = field(repr=False)  # kinetic off-diagonal
    potential: np.ndarray = field(repr=False)

    @property
    def kinetic(self) -> np.ndarray:
        """Dense -d^2/dr^2 + l(l+1)/r^2 (three-point stencil)."""
        n = self.grid.n_points
        k = np.zeros((n, n))
        i = np.arange(n)
        k[i, i] = self.diag
        k[i[:-1], i[1:]] = self.offdiag
        k[i[1:], i[:-1]] = self.offdiag
        return k

    def kinetic_eig(self):
        """Eigenpairs of the tridiagonal channel kinetic."""
        return sla.eigh_tridiagonal(self.diag, self.offdiag)

    def kinetic_eigvals(self):
        return sla.eigh_tridiagonal(self.diag, self.offdiag, eigvals_only=True)


def build_channel(grid: RadialGrid, ell: int, potential=None) -> ChannelOperator:
    if int(ell) != ell or ell < 0:
        raise ValueError(f"angular momentum must be a nonnegative integer, got {ell}")
    ell = int(ell)
    n = grid.n_points
    if n > MAX_CHANNEL_DIM:
        raise ValueError(f"channel dimension {n} exceeds the cap {MAX_CHANNEL_DIM}")
    if potential is None:
        potential = np.zeros(n)
    elif callable(potential):
        potential = np.asarray(potential(grid.r), dtype=float)
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (n,):
        raise ValueError(
            f"potential has shape {potential.shape}, grid has {n} points")
    h2 = grid.spacing**2
    r = grid.r
    d = 2.0 / h2 + ell * (ell + 1) / (r * r)
    e = np.full(n - 1, -1.0 / h2)
    return ChannelOperator(ell, grid, d, e, potential)


def apply_kinetic_model(op: ChannelOperator, model: KineticModel, eig=None) -> np.ndarray:
    """Dense f(kinetic) + diag(potential)."""
    if model.kind == "nonrelativistic":
        m = 0.5 * op.kinetic
    else:
        if eig is None:
            eig = op.kinetic_eig()
        if eig[0][0] <= 0:
            raise ValueError("channel kinetic is not positive definite")
        m = matrix_function(None, model.symbol, eig=eig)
    m[np.diag_indices_from(m)] += op.potential
    return m


def localized_negative_trace(h: np.ndarray, cutoff) -> float:
    """tr[Phi h Phi]_- with Phi = diag(cutoff).

    Rows and columns where the cutoff vanishes carry zero eigenvalues and
    are dropped before the eigensolve.
    """
    cutoff = np.asarray(cutoff, dtype=float)
    h = np.asarray(h)
    if h.shape != (cutoff.size, cutoff.size):
        raise ValueError(f"matrix {h.shape} does not match cutoff of length {cutoff.size}")
    keep = cutoff != 0.0
    if not keep.any():
        return 0.0
    c = cutoff[keep]
    sub = h[np.ix_(keep, keep)]
    sand = c[:, None] * sub * c[None, :]
    check_symmetric(sand)
    return negative_part_sum(np.linalg.eigvalsh(sand))


def _tridiagonal_sandwich_trace(op: ChannelOperator, cutoff):
    # nonrelativistic fast path: Phi (K/2 + V) Phi stays tridiagonal.
    # Returns (negative trace, number of negative eigenvalues).
    keep = np.flatnonzero(cutoff)
    if keep.size == 0:
        return 0.0, 0
    lo, hi = keep[0], keep[-1] + 1
    c = cutoff[lo:hi]
    d = c * c * (0.5 * op.diag[lo:hi] + op.potential[lo:hi])
    e = c[:-1] * c[1:] * 0.5 * op.offdiag[lo:hi - 1]
    if d.size == 1:
        return min(float(d[0]), 0.0), int(d[0] < 0)
    # only the eigenvalues below zero are computed
    w = sla.eigvalsh_tridiagonal(d, e, select="v", select_range=(-np.inf, 0.0))
    return negative_part_sum(w), int(np.sum(w < 0))


@dataclass
class LocalizedTraceResult:
    per_ell: list
    total: float
    ell_max_used: int
    tail_estimate: float
    model: str = ""
    grid: str = ""
    negative_counts: list = field(default_factory=list)

    def csv_rows(self):
        for (ell, c), n in zip(self.per_ell, self.negative_counts):
            yield ell, c, n


def _restricted_trace(op, models, cutoff, eig=None):
    """Localized traces for several kinetic models sharing one eigenbasis.

    Only the block of f(K) on the support of the cutoff is ever formed.
    Each entry is (negative trace, number of negative eigenvalues).
    """
    keep = np.flatnonzero(cutoff)
    if keep.size == 0:
        return [(0.0, 0)] * len(models)
    c = cutoff[keep]
    pot = op.potential[keep]
    w = v = None
    out = []
    for model in models:
        if model.kind == "nonrelativistic":
            out.append(_tridiagonal_sandwich_trace(op, cutoff))
            continue
        if w is None:
            w, v = op.kinetic_eig() if eig is None else eig
            if w[0] <= 0:
                raise ValueError("channel kinetic is not positive definite")
            vs = v[keep]
        fw = model.symbol(w)
        block = (vs * fw) @ vs.T
        block = 0.5 * (block + block.T)
        block[np.diag_indices_from(block)] += pot
        sand = c[:, None] * block * c[None, :]
        ev = sla.eigvalsh(sand, overwrite_a=True, check_finite=False)
        out.append((negative_part_sum(ev), int(np.sum(ev < 0))))
    return out


def sum_channels_multi(models: Sequence[KineticModel], potential, cutoff, grid: RadialGrid,
                       ell_truncation_tol: float = 1e-7, max_ell: int = 200,
                       spin_in_degeneracy: bool = False):
    """sum_channels for several kinetic models at once.

    The channel kinetic is diagonalized once per l and reused by every
    model; each model truncates independently, channels are reduced in
    ascending l.
    """
    r = grid.r
    if callable(potential):
        potential = potential(r)
    potential = np.asarray(potential, dtype=float)
    cutoff = np.asarray(cutoff, dtype=float)
    if cutoff.shape != (grid.n_points,):
        raise ValueError("cutoff does not match the grid")
    nm = len(models)
    per_ell = [[] for _ in range(nm)]
    counts = [[] for _ in range(nm)]
    totals = [0.0] * nm
    quiet = [0] * nm
    done = [False] * nm
    ell = 0
    while not all(done):
        if ell > max_ell:
            bad = [models[i].label for i in range(nm) if not done[i]]
            raise ChannelConvergenceError(
                f"no l-convergence by l = {max_ell} for {bad}", per_ell)
        op = build_channel(grid, ell, potential)
        active = [i for i in range(nm) if not done[i]]
        vals = _restricted_trace(op, [models[i] for i in active], cutoff)
        for i, (tr, cnt) in zip(active, vals):
            counts[i].append(cnt)
            if spin_in_degeneracy:
                contrib = (4 * ell + 2) * tr
            else:
                contrib = 2.0 * ((2 * ell + 1) * tr)
            per_ell[i].append((ell, contrib))
            totals[i] += contrib
            if abs(contrib) <= ell_truncation_tol * abs(totals[i]):
                quiet[i] += 1
            else:
                quiet[i] = 0
            if quiet[i] >= 2:
                done[i] = True
        ell += 1
    out = []
    for i, model in enumerate(models):
        pe = per_ell[i]
        # ascending-l reduction, independent of evaluation order
        total = 0.0
        for _, c in pe:
            total += c
        out.append(LocalizedTraceResult(
            per_ell=pe, total=total, ell_max_used=pe[-1][0],
            tail_estimate=2.0 * pe[-1][1], model=model.label, grid=grid.ident(),
            negative_counts=counts[i]))
    return out


def sum_channels(model: KineticModel, potential, cutoff, grid: RadialGrid,
                 ell_truncation_tol: float = 1e-7, max_ell: int = 200,
                 spin_in_degeneracy: bool = False) -> LocalizedTraceResult:
    """sum_l 2(2l+1) tr[Phi h_l Phi]_- with the two-quiet-channels stopping rule."""
    return sum_channels_multi([model], potential, cutoff, grid, ell_truncation_tol,
                              max_ell, spin_in_degeneracy)[0]


# ---------------------------------------------------------------------------
# Validation against closed forms
# ---------------------------------------------------------------------------


@dataclass
class HydrogenReport:
    spacings: list
    raw: dict  # ell -> array (n_grids, 3)
    extrapolated: dict  # ell -> array (3,)
    exact: dict
    max_error: float
    monotone: bool


def hydrogen_check(grids: Sequence[RadialGrid], n_levels: int = 3,
                   ells=(0, 1, 2)) -> HydrogenReport:
    """Lowest eigenvalues of -u''/2 + l(l+1)/(2r^2) u - u/r, Richardson
    extrapolated over a ladder of successively halved spacings."""
    grids = list(grids)
    if len(grids) < 2:
        raise ValueError("need at least two grids")
    hs = [g.spacing for g in grids]
    for a, b in zip(hs, hs[1:]):
        if not np.isclose(a / b, 2.0):
            raise ValueError("grids must be nested by halving the spacing")
    raw, extr, exact = {}, {}, {}
    monotone = True
    worst = 0.0
    for ell in ells:
        rows = []
        for g in grids:
            op = build_channel(g, ell, -1.0 / g.r)
            w = sla.eigh_tridiagonal(0.5 * op.diag + op.potential, 0.5 * op.offdiag,
                                     eigvals_only=True, select="i",
                                     select_range=(0, n_levels - 1))
            rows.append(w)
        rows = np.array(rows)
        raw[ell] = rows
        diffs = np.diff(rows, axis=0)
        if rows.shape[0] >= 3:
            # successive differences must shrink and keep their sign
            same_sign = np.all(np.sign(diffs[1:]) == np.sign(diffs[:-1]))
            shrinking = np.all(np.abs(diffs[1:]) < np.abs(diffs[:-1]))
            monotone = monotone and bool(same_sign and shrinking)
        ex = np.array([richardson(rows[:, k])[-1] for k in range(n_levels)])
        extr[ell] = ex
        n = np.arange(ell + 1, ell + 1 + n_levels)
        exact[ell] = -0.5 / n**2
        worst = max(worst, float(np.max(np.abs(ex - exact[ell]))))
    return HydrogenReport(hs, raw, extr, exact, worst, monotone)


def _sqrt_laplacian_dst(n: int, h: float):
    """Eigenvalues of the l = 0 Dirichlet three-point Laplacian and a matvec
    for its square root through the type-I sine transform."""
    k = np.arange(1, n + 1)
    lam = (2.0 - 2.0 * np.cos(np.pi * k / (n + 1))) / (h * h)
    root = np.sqrt(lam)

    def apply(v):
        return scipy.fft.idst(root * scipy.fft.dst(v, type=1, norm="ortho"),
                              type=1, norm="ortho")

    return root, apply


def hardy_min_eig(c: float, grids: Sequence[RadialGrid], dense_limit: int = 2048) -> list:
    """Lowest eigenvalue of sqrt(K_0) - c/r (l = 0, massless) on each grid.

    Small grids are diagonalized densely through apply_kinetic_model; larger
    ones use Lanczos with the square root applied by fast sine transforms.
    """
    if c < 0:
        raise ValueError("coupling must be nonnegative")
    out = []
    for g in grids:
        n = g.n_points
        pot = -c / g.r
        if n <= dense_limit:
            op = build_channel(g, 0, pot)
            m = apply_kinetic_model(op, KineticModel.massless())
            out.append(float(sla.eigvalsh(m, subset_by_index=[0, 0])[0]))
            continue
        _, apply = _sqrt_laplacian_dst(n, g.spacing)
        A = LinearOperator((n, n), matvec=lambda v: apply(v) + pot * v, dtype=float)
        v0 = np.exp(-g.r / g.r_max)  # deterministic start
        w = eigsh(A, k=1, which="SA", v0=v0, tol=1e-10, maxiter=20000,
                  return_eigenvectors=False)
        out.append(float(w[0]))
    return out
