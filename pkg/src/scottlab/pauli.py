"""Lattice Pauli operator on a periodic cube.

Sites x = (i - N/2) a, i = 0..N-1 per axis, so the origin is a lattice
site.  Magnetic fields enter through Peierls phases u = exp(-i theta) with
theta_j(x) the line integral of A along the link x -> x + a e_j, and

    P = (p - A)^2_lattice (x) 1  -  sum_j B_j (x) sigma_j,

with B the discrete curl (plaquette flux / a^2, averaged over the four
plaquettes around a site).  Spinor index = 2 * site + spin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import chebyshev as cheb
from scipy.sparse.linalg import LinearOperator, eigsh

from .inequalities import InequalityReport
from .numerics import negative_part_sum

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

#: largest spinor dimension diagonalized densely
DENSE_MAX_DIM = 4096


@dataclass(frozen=True)
class LatticeBox:
    L: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N % 2 or not (8 <= self.N <= 32):
            raise ValueError(f"N must be even with 8 <= N <= 32, got {self.N}")
        if not self.L > 0:
            raise ValueError("side length must be positive")

    @property
    def a(self) -> float:
        return self.L / self.N

    @property
    def sites(self) -> int:
        return self.N**3

    @property
    def dim(self) -> int:
        return 2 * self.N**3

    def coords(self):
        """Site coordinates, each of shape (N, N, N), ordered (x, y, z)."""
        x = (np.arange(self.N) - self.N // 2) * self.a
        return np.meshgrid(x, x, x, indexing="ij")

    def distance(self, center=(0.0, 0.0, 0.0)):
        """Minimum-image distance from ``center`` to every site."""
        out = np.zeros((self.N,) * 3)
        for c, X in zip(center, self.coords()):
            d = np.abs(X - c)
            d = np.minimum(d, self.L - d)
            out += d * d
        return np.sqrt(out)


@dataclass(frozen=True)
class FieldSpec:
    """kind: 'zero', 'constant' (B along z, ``flux`` quanta per xy-face) or
    'bump' (divergence-free compactly supported A, ``amplitude``, ``radius``)."""

    kind: str = "zero"
    flux: float = 0.0
    amplitude: float = 0.0
    radius: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)

    @property
    def ident(self) -> str:
        if self.kind == "constant":
            return f"constant(flux={self.flux:g})"
        if self.kind == "bump":
            return f"bump(amplitude={self.amplitude:g},radius={self.radius:g})"
        return "zero"


@dataclass(frozen=True)
class GaugeField:
    box: LatticeBox
    theta: np.ndarray = field(repr=False)  # (3, N, N, N) link phases
    B: np.ndarray = field(repr=False)  # (3, N, N, N) site field
    plaquette_flux: np.ndarray = field(repr=False)  # (3, N, N, N), flux through the face normal to j
    field_energy: float = 0.0
    ident: str = "zero"

    @property
    def links(self) -> np.ndarray:
        return np.exp(-1j * self.theta)


def _wrap(phase):
    return np.angle(np.exp(1j * phase))


def _plaquettes(theta):
    """Flux through elementary faces: index j is the normal direction."""
    out = np.empty_like(theta)
    for j, (p, q) in enumerate(((1, 2), (2, 0), (0, 1))):
        out[j] = (theta[p] + np.roll(theta[q], -1, axis=p)
                  - np.roll(theta[p], -1, axis=q) - theta[q])
    return _wrap(out)


def _site_field(flux, a):
    B = np.empty_like(flux)
    for j, (p, q) in enumerate(((1, 2), (2, 0), (0, 1))):
        f = flux[j]
        B[j] = 0.25 * (f + np.roll(f, 1, axis=p) + np.roll(f, 1, axis=q)
                       + np.roll(np.roll(f, 1, axis=p), 1, axis=q)) / a**2
    return B


def _bump_potential(spec, X, Y, Z):
    """A = (d_y psi, -d_x psi, 0) with psi = amp rho^2 (1 - u/rho^2)^4, u = |x - c|^2."""
    x, y, z = X - spec.center[0], Y - spec.center[1], Z - spec.center[2]
    rho2 = spec.radius**2
    u = x * x + y * y + z * z
    w = np.clip(1.0 - u / rho2, 0.0, None)
    dG = -4.0 * w**3
    return spec.amplitude * 2.0 * y * dG, -spec.amplitude * 2.0 * x * dG, np.zeros_like(u)


def bump_field_exact(spec: FieldSpec, X, Y, Z):
    """Closed-form curl of the bump vector potential."""
    x, y, z = X - spec.center[0], Y - spec.center[1], Z - spec.center[2]
    rho2 = spec.radius**2
    u = x * x + y * y + z * z
    w = np.clip(1.0 - u / rho2, 0.0, None)
    dG = -4.0 * w**3
    d2G = 12.0 * w**2 / rho2
    amp = spec.amplitude
    return (amp * 4.0 * x * z * d2G, amp * 4.0 * y * z * d2G,
            -amp * (4.0 * dG + 4.0 * (x * x + y * y) * d2G))


def _from_theta(box, theta, ident):
    flux = _plaquettes(theta)
    B = _site_field(flux, box.a)
    energy = float(np.sum((flux / box.a**2) ** 2) * box.a**3)
    return GaugeField(box, theta, B, flux, energy, ident)


def build_gauge(box: LatticeBox, spec: FieldSpec = FieldSpec()) -> GaugeField:
    N, a = box.N, box.a
    theta = np.zeros((3, N, N, N))
    if spec.kind == "zero":
        pass
    elif spec.kind == "constant":
        n = round(spec.flux)
        if abs(spec.flux - n) > 1e-9:
            raise ValueError(
                f"flux {spec.flux} per face is not quantized; nearest admissible value is {n} "
                f"(B = {2 * np.pi * n / box.L**2:.12g})")
        f = 2.0 * np.pi * n / N**2  # flux per plaquette
        i = np.arange(N)[:, None, None]
        j = np.arange(N)[None, :, None]
        theta[1] = f * i * np.ones((1, N, N))
        # the wrap-around x-links carry the compensating phase
        theta[0, N - 1] = (-f * N * j * np.ones((1, 1, N)))[0]
    elif spec.kind == "bump":
        if spec.radius <= 0 or spec.radius >= box.L / 2:
            raise ValueError("bump radius must lie in (0, L/2)")
        X, Y, Z = box.coords()
        for jdx in range(3):
            shift = [X, Y, Z]
            shift[jdx] = shift[jdx] + 0.5 * a
            A = _bump_potential(spec, *shift)
            theta[jdx] = a * A[jdx]
    else:
        raise ValueError(f"unknown field kind {spec.kind!r}")
    return _from_theta(box, theta, spec.ident)


def gauge_transform(gauge: GaugeField, chi: np.ndarray) -> GaugeField:
    """theta_j(x) -> theta_j(x) + chi(x + e_j) - chi(x)."""
    theta = gauge.theta.copy()
    for j in range(3):
        theta[j] += np.roll(chi, -1, axis=j) - chi
    return _from_theta(gauge.box, theta, gauge.ident + "+gauge")


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinorOperator:
    matrix: sp.csr_matrix = field(repr=False)
    gauge_id: str = "zero"
    potential_id: str = "none"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.getH()
        return float(abs(d).max()) if d.nnz else 0.0


def magnetic_laplacian(gauge: GaugeField) -> sp.csr_matrix:
    """(p - A)^2 on scalar lattice functions (sparse, N^3 x N^3)."""
    box = gauge.box
    N = box.N
    n = N**3
    idx = np.arange(n).reshape(N, N, N)
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 6.0 / box.a**2)]
    u = gauge.links
    for j in range(3):
        fwd = np.roll(idx, -1, axis=j)
        hop = -u[j] / box.a**2
        rows += [idx.ravel(), fwd.ravel()]
        cols += [fwd.ravel(), idx.ravel()]
        vals += [hop.ravel(), np.conj(hop).ravel()]
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n), dtype=complex)


def build_pauli(gauge: GaugeField, potential=None, potential_id: str = "none") -> SpinorOperator:
    box = gauge.box
    lap = magnetic_laplacian(gauge)
    M = sp.kron(lap, sp.identity(2, dtype=complex, format="csr"), format="csr")
    if np.any(gauge.B):
        for j in range(3):
            M = M - sp.kron(sp.diags(gauge.B[j].ravel()), sp.csr_matrix(SIGMA[j]), format="csr")
    if potential is not None:
        v = np.asarray(potential, dtype=float)
        if v.shape not in ((box.N,) * 3, (box.sites,)):
            raise ValueError(f"potential of shape {v.shape} does not fit the {box.N}^3 lattice")
        M = M + sp.kron(sp.diags(v.ravel()), sp.identity(2, format="csr"), format="csr")
    return SpinorOperator(M.tocsr(), gauge.ident, potential_id)


def lowest_eigenvalue(op: SpinorOperator) -> float:
    if op.dim <= DENSE_MAX_DIM:
        return float(np.linalg.eigvalsh(op.matrix.toarray())[0])
    v0 = np.ones(op.dim, dtype=complex)
    return float(eigsh(op.matrix, k=1, which="SA", v0=v0, tol=1e-12,
                       return_eigenvectors=False)[0])


# ---------------------------------------------------------------------------
# |sigma . (p - A)| = sqrt(P)
# ---------------------------------------------------------------------------


class SqrtPauli:
    """Applies sqrt(P_+) to vectors.

    Dense spectral calculus up to DENSE_MAX_DIM.  Beyond that: the lowest
    eigenpairs are deflated exactly and sqrt is applied to the rest by a
    Chebyshev expansion on [lambda_cut, lambda_max].  The projector is
    applied on both sides of the polynomial, which suppresses the growth of
    the expansion below lambda_cut acting on round-off remnants of the
    deflated modes.
    """

    def __init__(self, P: sp.csr_matrix, dense: Optional[bool] = None, tol: float = 1e-12,
                 n_deflate: Optional[int] = None, kappa: float = 60.0):
        self.P = P
        self.n = P.shape[0]
        self.dense = self.n <= DENSE_MAX_DIM if dense is None else dense
        self.min_eig = None
        if self.dense:
            w, v = np.linalg.eigh(P.toarray())
            self.min_eig = float(w[0])
            self.matrix = (v * np.sqrt(np.maximum(w, 0.0))) @ v.conj().T
            self.matrix = 0.5 * (self.matrix + self.matrix.conj().T)
            return
        lam_max = float(abs(P).sum(axis=1).max())  # Gershgorin
        lam_cut_target = lam_max / kappa
        k = n_deflate or 24
        while True:
            w, v = eigsh(P, k=k + 1, which="SA", tol=1e-14, v0=np.ones(self.n, dtype=complex))
            order = np.argsort(w)
            w, v = w[order], v[:, order]
            if w[-1] >= lam_cut_target or k >= 2000:
                break
            k = int(k * 1.6) + 1
        # cut inside the widest relative gap in the upper half of the computed window
        gaps = np.diff(w)[k // 2:]
        K = k // 2 + int(np.argmax(gaps)) + 1
        self.min_eig = float(w[0])
        self.V = v[:, :K]
        self.root_low = np.sqrt(np.maximum(w[:K], 0.0))
        lo, hi = float(w[K]), lam_max
        self.interval = (lo, hi)
        self.cut_gap = float(w[K] - w[K - 1])
        deg = 16
        while True:
            c = cheb.chebinterpolate(lambda x: np.sqrt(0.5 * (hi - lo) * x + 0.5 * (hi + lo)), deg)
            if np.max(np.abs(c[-4:])) < tol * np.sqrt(hi) or deg >= 4000:
                break
            deg *= 2
        keep = np.flatnonzero(np.abs(c) >= 0.1 * tol * np.sqrt(hi))
        self.coef = c[: keep[-1] + 1]
        self.degree = self.coef.size - 1

    def _project(self, x):
        return x - self.V @ (self.V.conj().T @ x)

    def _cheb(self, x):
        lo, hi = self.interval
        a2 = 2.0 / (hi - lo)
        b = (hi + lo) / (hi - lo)

        def T(y):  # mapped operator (2P - (hi+lo)) / (hi - lo)
            return a2 * (self.P @ y) - b * y

        t0 = x
        t1 = T(x)
        y = self.coef[0] * t0 + self.coef[1] * t1
        for ck in self.coef[2:]:
            t0, t1 = t1, 2.0 * T(t1) - t0
            y = y + ck * t1
        return y

    def matvec(self, x):
        if self.dense:
            return self.matrix @ x
        low = self.V @ (self.root_low * (self.V.conj().T @ x))
        return low + self._project(self._cheb(self._project(x)))


def negative_trace_sqrt_minus(root: SqrtPauli, W, block: int = 16):
    """tr(sqrt(P) - W)_- with W a scalar site potential (spin-diagonal)."""
    w2 = np.repeat(np.asarray(W, dtype=float).ravel(), 2)
    n = root.n
    if root.dense:
        vals = np.linalg.eigvalsh(root.matrix - np.diag(w2))
        return negative_part_sum(vals), int(np.sum(vals < 0))
    A = LinearOperator((n, n), matvec=lambda x: root.matvec(x.ravel()) - w2 * x.ravel(),
                       dtype=complex)
    k = block
    while True:
        vals = eigsh(A, k=k, which="SA", tol=1e-10, v0=np.ones(n, dtype=complex),
                     return_eigenvectors=False)
        if vals.max() >= 0 or k >= n // 4:
            break
        k *= 2
    return negative_part_sum(vals), int(np.sum(vals < 0))


def coulomb_site_potential(box: LatticeBox, center=(0.0, 0.0, 0.0), coupling=2.0 / np.pi):
    """c / max(|x - center|, a/2) at the lattice sites (minimum image)."""
    d = box.distance(center)
    return coupling / np.maximum(d, 0.5 * box.a)


def gaussian_site_potential(box: LatticeBox, depth, width, center=(0.0, 0.0, 0.0)):
    d = box.distance(center)
    return depth * np.exp(-(d / width) ** 2)


def cphlt_check(gauge: GaugeField, potentials: Sequence, coulomb_center=(0.0, 0.0, 0.0),
                coulomb: bool = True, dense: Optional[bool] = None) -> InequalityReport:
    """Fitted C in tr(|sigma.(p - A)| - 2/(pi|x|) - V)_- >= -C (int |B|^2 + int V_+^4).

    ``potentials`` are site arrays V >= 0.  Cases with a vanishing right side
    are reported but do not enter the fit.
    """
    box = gauge.box
    P = build_pauli(gauge).matrix
    root = SqrtPauli(P, dense=dense)
    vc = coulomb_site_potential(box, coulomb_center) if coulomb else 0.0
    a3 = box.a**3
    table = []
    ratios = []
    for k, V in enumerate(potentials):
        V = np.asarray(V, dtype=float).reshape((box.N,) * 3)
        if np.any(V < 0):
            raise ValueError("potentials must be nonnegative")
        lhs, count = negative_trace_sqrt_minus(root, vc + V)
        rhs = gauge.field_energy + float(np.sum(V**4) * a3)
        ratio = -lhs / rhs if rhs > 0 else np.nan
        if rhs > 0:
            ratios.append(ratio)
        table.append({"case": k, "lhs": lhs, "negative_eigenvalues": count, "field_energy":
                      gauge.field_energy, "potential_term": rhs - gauge.field_energy,
                      "ratio": ratio})
    C = max(ratios) if ratios else np.nan
    margins = [(row["lhs"] + C * (row["field_energy"] + row["potential_term"]))
               / (C * (row["field_energy"] + row["potential_term"]))
               for row in table if np.isfinite(row["ratio"]) and C > 0]
    extra = {"N": box.N, "L": box.L, "field": gauge.ident, "coulomb": bool(coulomb),
             "topology": "periodic torus", "min_eig_pauli": root.min_eig,
             "method": "dense" if root.dense else "deflated-chebyshev"}
    if not root.dense:
        extra.update({"deflated": int(root.V.shape[1]), "chebyshev_degree": root.degree,
                      "interval": list(root.interval)})
    return InequalityReport("cphlt", len(table), float(min(margins)) if margins else np.nan,
                            float(C), table, extra)
