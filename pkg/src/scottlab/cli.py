"""Command-line front end.

Every subcommand reads its settings from built-in defaults, then an optional
INI file (section named after the subcommand), then command-line flags.  The
fully resolved settings go into ``manifest.json`` next to the outputs, so a
run can be repeated with ``scottlab rerun DIR/manifest.json``.

Exit status: 0 success, 1 numeric failure, 2 usage or configuration error.
Outputs are only written once every stage has finished.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import operator
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .manifest import RunManifest, Stopwatch, csv_text, dumps, write_outputs
from .numerics import AsymmetricMatrixError, CutoffProfile, RadialGrid, SpectralDomainError

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass



# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_real(text: str) -> float:
    """A number or simple arithmetic in numbers and ``pi`` (e.g. ``2/pi``)."""
    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return float(np.pi)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"cannot read {text!r} as a number")

    try:
        value = ev(ast.parse(text.strip(), mode="eval").body)
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot read {text!r} as a number") from exc
    if not np.isfinite(value):
        raise ConfigError(f"{text!r} is not finite")
    return value


def _items(text):
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot read {text!r} as a boolean")


def _int(text):
    v = parse_real(text)
    if v != int(v):
        raise ConfigError(f"{text!r} is not an integer")
    return int(v)


PARSERS = {
    "real": parse_real,
    "int": _int,
    "reals": lambda t: [parse_real(x) for x in _items(t)],
    "ints": lambda t: [_int(x) for x in _items(t)],
    "str": lambda t: t.strip(),
    "strs": _items,
    "bool": _bool,
}


@dataclass(frozen=True)
class Option:
    kind: str
    default: str
    help: str


# Defaults are kept as text so that they pass through the same parser as
# user input; the manifest records the parsed values.
OPTIONS = {
    "tf": {
        "Z": Option("reals", "1,10", "nuclear charges (atomic units, e = 1)"),
        "points_per_b": Option("int", "400", "grid points per TF length b of the largest Z"),
        "extent": Option("real", "50", "grid extent in units of b"),
        "tolerance": Option("real", "1e-8", "shooting bracket width for Phi'(0)"),
        "residual_tol": Option("real", "1e-3", "bound on the relative Euler-Lagrange residual"),
        "scaling_tol": Option("real", "1e-3", "relative tolerance of the Z^(7/3) scaling check"),
    },
    "semiclassics": {
        "Z": Option("reals", "1", "nuclear charges for the phase-space identity"),
        "points_per_b": Option("int", "800", "grid points per TF length b"),
        "extent": Option("real", "50", "grid extent in units of b"),
        "identity_tol": Option("real", "1e-3", "relative tolerance of the identity"),
        "Z_total": Option("real", "10", "total nuclear charge of the molecule"),
        "z": Option("reals", "1", "normalized charges z_k, summing to 1"),
        "alpha": Option("real", "0.0", "fine-structure constant (dimensionless)"),
    },
    "scott": {
        "alphas": Option("reals", "0", "values of Z*alpha in [0, 2/pi], ascending"),
        "R": Option("reals", "8,16,32,64", "cutoff radii (Bohr units of the rescaled problem)"),
        "profile": Option("str", "smoothstep", "cutoff profile: smoothstep, cinf or sharp"),
        "D": Option("real", "0", "well depth coefficient, potential -D/R^2 on the support"),
        "spacing": Option("str", "auto", "radial step (length); auto = min(0.05, alpha/8)"),
        "margin": Option("real", "8", "distance from profile support to the wall (length)"),
        "ell_tol": Option("real", "1e-7", "relative size of the last channel kept"),
        "max_ell": Option("int", "200", "largest angular momentum"),
        "alternate_profile": Option("str", "none", "second profile for the profile check"),
        "check_alphas": Option("reals", "", "alphas recomputed with the alternate profile"),
        "tolerance": Option("real", "0.01", "allowed increase between successive alphas"),
        "profile_tolerance": Option("real", "0.02", "allowed profile dependence"),
        "channels": Option("bool", "false", "also write per-channel contributions"),
        "spacing_check": Option("bool", "false",
                                "recompute the largest alpha at the smallest R with half the spacing"),
    },
    "verify": {
        "families": Option("strs", "pullout,ims,monotone,hardy",
                           "families: pullout, ims, monotone, hardy, daubechies, mcdly, cphlt"),
        "dump_cases": Option("bool", "false", "write per-case CSV tables"),
        "pullout_trials": Option("int", "1000", "random trials"),
        "pullout_seed": Option("int", "42", "seed of the pull-out battery"),
        "pullout_n": Option("int", "6", "matrix order"),
        "pullout_parts": Option("int", "3", "number of resolution operators"),
        "pullout_exponent": Option("real", "0.5", "operator-concave power"),
        "pullout_tol": Option("real", "1e-10", "violation margin"),
        "ims_spacings": Option("reals", "0.1,0.05", "radial steps of the IMS battery (length)"),
        "ims_radii": Option("reals", "2,4", "partition scales (length)"),
        "ims_ells": Option("ints", "0,1,2", "angular momenta"),
        "ims_extent": Option("real", "20", "grid extent (length)"),
        "ims_tol": Option("real", "1e-12", "residual bound relative to the matrix norm"),
        "monotone_samples": Option("int", "100000", "random (a, xi) pairs"),
        "monotone_seed": Option("int", "7", "seed of the monotonicity battery"),
        "hardy_couplings": Option("reals", "2/pi,0.7", "couplings c in sqrt(-Laplacian) - c/r"),
        "hardy_sizes": Option("ints", "2047,4095,8191", "interior points of the ladder grids"),
        "hardy_length": Option("real", "1", "radial box length"),
        "daubechies_alpha": Option("real", "0.1", "alpha of the Chandrasekhar operator"),
        "daubechies_depths": Option("reals", "1,4,16", "Gaussian well depths (energy)"),
        "daubechies_spacings": Option("reals", "0.05,0.025,0.0125", "radial steps"),
        "mcdly_alpha": Option("real", "0.25", "alpha of the Chandrasekhar operator"),
        "mcdly_couplings": Option("reals", "2/pi,1/4,1/128", "values of nu*alpha"),
        "mcdly_depths": Option("reals", "0,1,4", "Gaussian well depths (energy)"),
        "mcdly_refinements": Option("ints", "8,16,32", "grid steps alpha/k"),
        "well_width": Option("real", "1", "Gaussian well width (length)"),
        "cphlt_L": Option("real", "6", "torus side (length)"),
        "cphlt_N": Option("ints", "12,16", "lattice sizes"),
        "cphlt_amplitude": Option("real", "0.3", "bump field amplitude"),
        "cphlt_radius": Option("real", "2", "bump field radius (length)"),
        "cphlt_depths": Option("reals", "0.5,2", "Gaussian potential depths (energy)"),
        "cphlt_width": Option("real", "1", "Gaussian potential width (length)"),
    },
    "pauli": {
        "L": Option("real", "4", "torus side (length)"),
        "N": Option("ints", "8,16,32", "lattice sizes, even, 8 to 32"),
        "field": Option("str", "constant", "field kind: zero, constant or bump"),
        "flux": Option("real", "2", "flux quanta per xy face (constant field)"),
        "amplitude": Option("real", "0.3", "bump amplitude"),
        "radius": Option("real", "1.5", "bump radius (length)"),
        "cphlt": Option("bool", "false", "also run the critical Hardy-Lieb-Thirring battery"),
        "depths": Option("reals", "0.5,2", "Gaussian potential depths (energy)"),
        "width": Option("real", "1", "Gaussian potential width (length)"),
        "coulomb": Option("bool", "true", "include -2/(pi|x|) in the battery"),
    },
}

HARD_FAMILIES = ("pullout", "ims", "monotone", "hardy")
ALL_FAMILIES = HARD_FAMILIES + ("daubechies", "mcdly", "cphlt")


def resolve(command: str, config_path=None, overrides=None) -> dict:
    """Defaults, then the INI file, then explicit overrides; all parsed."""
    spec = OPTIONS[command]
    raw = {k: o.default for k, o in spec.items()}
    if config_path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(config_path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        for section in cp.sections():
            if section != command:
                raise ConfigError(f"unexpected section [{section}]; expected [{command}]")
        if cp.has_section(command):
            for k, v in cp.items(command):
                if k not in spec:
                    raise ConfigError(f"unknown key {k!r} in [{command}]")
                raw[k] = v
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    out = {}
    for k, o in spec.items():
        try:
            out[k] = PARSERS[o.kind](str(raw[k]))
        except ConfigError as exc:
            raise ConfigError(f"{k}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Commands.  Each returns (files, identifiers, seeds, failure message or None).
# ---------------------------------------------------------------------------


def _fmt(x):
    return f"{x:g}"


def run_tf(cfg, sw):
    from .tf import solve_tf_ode, tf_atom, tf_length_scale

    Zs = cfg["Z"]
    if not Zs or any(z <= 0 for z in Zs):
        raise ConfigError("Z must be a non-empty list of positive charges")
    if cfg["points_per_b"] < 10 or cfg["extent"] <= 1:
        raise ConfigError("grid too coarse or too short")
    with sw.stage("universal"):
        uni = solve_tf_ode(cfg["tolerance"])
    files, atoms = {}, []
    # one absolute spacing, fine enough for the largest Z; grids scaled by
    # b(Z) would make the Z^(7/3) check exact by construction
    h = tf_length_scale(max(Zs)) / cfg["points_per_b"]
    with sw.stage("atoms"):
        for Z in Zs:
            grid = RadialGrid.from_extent(cfg["extent"] * tf_length_scale(Z), h)
            atom = tf_atom(Z, grid, uni, cfg["residual_tol"])
            atoms.append(atom)
            files[f"tf_Z{_fmt(Z)}.csv"] = csv_text(
                ("r", "rho_tf", "v_tf"), zip(grid.r, atom.rho, atom.v_tf))
    scaling = []
    ref = atoms[0]
    for atom in atoms[1:]:
        exact = (atom.Z / ref.Z) ** (7.0 / 3.0)
        ratio = atom.e_tf / ref.e_tf
        rel = abs(ratio - exact) / exact
        scaling.append({"Z": atom.Z, "Z_ref": ref.Z, "ratio": ratio, "exact": exact,
                        "relative_error": rel, "ok": bool(rel <= cfg["scaling_tol"])})
    summary = {
        "slope": uni.initial_slope, "slope_bracket": list(uni.slope_bracket),
        "far_field_exponent": uni.far_field_exponent,
        "atoms": [{"Z": a.Z, "E_tf": a.e_tf, "D_self": a.d_self, "E_over_Z73": a.e_tf / a.Z**(7/3),
                   "length_scale_b": a.b, "el_residual": a.el_residual, "mass": a.mass,
                   "grid": a.grid.ident()} for a in atoms],
        "scaling": scaling,
    }
    files["tf_summary.json"] = dumps(summary)
    ids = {"grids": {_fmt(a.Z): a.grid.ident() for a in atoms}}
    bad = [s["Z"] for s in scaling if not s["ok"]]
    fail = f"Z^(7/3) scaling outside tolerance for Z = {bad}" if bad else None
    return files, ids, {}, fail


def run_semiclassics(cfg, sw):
    from .tf import (atom_summary, sc_energy, semiclassical_params, solve_tf_ode, tf_atom,
                     tf_grid, vtf_bound_constants)

    try:
        params = semiclassical_params(cfg["Z_total"], cfg["z"], cfg["alpha"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg["Z"] or any(z <= 0 for z in cfg["Z"]):
        raise ConfigError("Z must be a non-empty list of positive charges")
    with sw.stage("universal"):
        uni = solve_tf_ode()
    rows, checks = [], []
    with sw.stage("identity"):
        for Z in cfg["Z"]:
            atom = tf_atom(Z, tf_grid(Z, cfg["points_per_b"], cfg["extent"]), uni)
            sc = sc_energy(atom.v_tf, np.ones(atom.grid.n_points), atom.grid)
            target = atom.e_tf + atom.d_self
            rel = abs(sc - target) / abs(atom.e_tf)
            bounds = vtf_bound_constants(atom)
            rows.append((Z, atom.e_tf, atom.d_self, sc, target, rel, bounds["sup_core"],
                         bounds["sup_rV_over_Z"], bounds["sup_r4V"]))
            checks.append({**atom_summary(atom, uni), "sc_energy": sc, "E_plus_D": target,
                           "relative_difference": rel, "ok": bool(rel <= cfg["identity_tol"]),
                           "bounds": bounds})
    files = {
        "semiclassics.csv": csv_text(
            ("Z", "E_tf", "D_self", "sc_energy", "E_plus_D", "rel_diff", "sup_core",
             "sup_rV_over_Z", "sup_r4V"), rows),
        "semiclassics.json": dumps({
            "identity": checks,
            "parameters": {"Z": params.Z, "z": list(params.z), "kappa": params.kappa,
                           "h": params.h, "beta": params.beta, "beta_over_h": params.beta_over_h,
                           "alpha": params.alpha, "critical": params.critical,
                           "subcritical": params.subcritical}}),
    }
    bad = [c["Z"] for c in checks if not c["ok"]]
    fail = f"phase-space identity outside tolerance for Z = {bad}" if bad else None
    return files, {"grids": {_fmt(c["Z"]): c["grid"] for c in checks}}, {}, fail


def run_scott(cfg, sw):
    from .scott import CRITICAL_ALPHA, SCOTT_CSV_COLUMNS, ScottConfig, scott_table

    alphas = sorted(cfg["alphas"])
    if not alphas:
        raise ConfigError("alpha list is empty")
    if any(a < 0 or a > CRITICAL_ALPHA + 1e-12 for a in alphas):
        raise ConfigError("alphas must lie in [0, 2/pi]")
    if not cfg["R"] or min(cfg["R"]) < 4:
        raise ConfigError("R schedule must be non-empty with every R >= 4")
    if cfg["D"] < 0:
        raise ConfigError("D must be nonnegative")
    try:
        profile = CutoffProfile(cfg["profile"])
        alt = None if cfg["alternate_profile"] == "none" else CutoffProfile(cfg["alternate_profile"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    spacing = None if cfg["spacing"] == "auto" else parse_real(cfg["spacing"])
    if spacing is not None and not spacing > 0:
        raise ConfigError("spacing must be positive")
    conf = ScottConfig(spacing, cfg["margin"], cfg["ell_tol"], cfg["max_ell"])
    h = min(conf.spacing_for(a) for a in alphas)
    for a in alphas:
        if a > 0 and h > a / 8 + 1e-15:
            raise ConfigError(f"spacing {h:g} does not resolve alpha = {a:g}")
    if alt is not None and any(c not in alphas for c in cfg["check_alphas"]):
        raise ConfigError("check_alphas must be a subset of alphas")
    with sw.stage("table"):
        table = scott_table(alphas, cfg["R"], profile, conf, alt, cfg["check_alphas"],
                            cfg["tolerance"], cfg["profile_tolerance"], cfg["D"],
                            cfg["spacing_check"])
    files = {
        "scott.csv": csv_text(SCOTT_CSV_COLUMNS, table.rows()),
        "scott_summary.json": dumps({
            "entries": [{"alpha": e.alpha, "R": e.R, "s2_estimate": e.s2_estimate,
                         "extrapolated": e.extrapolated, "err_bar": e.err_bar,
                         "successive_differences": e.successive_differences,
                         "spacing": e.spacing, "margin": e.margin}
                        for e in table.entries],
            "monotone": table.monotone, "worst_increase": table.worst_increase,
            "tolerance": table.tolerance, "profile_check": table.profile_check,
            "spacing_check": table.spacing_check,
            "magnetic_field": "A = 0 slice; the infimum over A is not computed"}),
    }
    if cfg["channels"]:
        files["scott_channels.csv"] = csv_text(
            ("alpha", "R", "ell", "contribution", "negative_eigenvalues"),
            [(e.alpha, p.R, *row) for e in table.entries for p in e.history
             for row in p.channels])
    e0 = table.entries[0]
    grid = RadialGrid.from_extent(profile.support * max(cfg["R"]) + conf.margin, e0.spacing)
    ids = {"profile": profile.name,
           "largest_grid": grid.ident(),
           "magnetic_field": "A = 0 slice; the infimum over A is not computed"}
    fail = None
    if table.failed:
        fail = (f"table not non-increasing (worst increase {table.worst_increase:.3g})"
                if not table.monotone else "profile check outside tolerance")
    return files, ids, {}, fail


def _cases_csv(report):
    keys = sorted({k for row in report.table for k in row})
    rows = []
    for row in report.table:
        vals = []
        for k in keys:
            v = row.get(k, "")
            if isinstance(v, (list, tuple)):
                v = ";".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)
            vals.append(v)
        rows.append(vals)
    return csv_text(keys, rows)


def run_verify(cfg, sw):
    from . import inequalities as iq

    fams = cfg["families"]
    unknown = [f for f in fams if f not in ALL_FAMILIES]
    if not fams or unknown:
        raise ConfigError(f"unknown or empty family selection {unknown or fams}")
    reports = {}
    for fam in fams:
        with sw.stage(fam):
            if fam == "pullout":
                rep = iq.pullout_test(cfg["pullout_n"], cfg["pullout_parts"],
                                      cfg["pullout_exponent"], cfg["pullout_trials"],
                                      cfg["pullout_seed"], cfg["pullout_tol"])
            elif fam == "ims":
                rep = _ims_battery(cfg)
            elif fam == "monotone":
                rep = iq.monotone_shift_test(cfg["monotone_samples"], cfg["monotone_seed"])
            elif fam == "hardy":
                rep = iq.hardy_ladder(cfg["hardy_couplings"], cfg["hardy_sizes"],
                                      cfg["hardy_length"])
            elif fam == "daubechies":
                wells = [iq.gaussian_well(d, cfg["well_width"]) for d in cfg["daubechies_depths"]]
                rep = iq.daubechies_constant(cfg["daubechies_alpha"], wells,
                                             cfg["daubechies_spacings"])
            elif fam == "mcdly":
                wells = [iq.gaussian_well(d, cfg["well_width"]) for d in cfg["mcdly_depths"]]
                rep = iq.mcdly_constant(cfg["mcdly_alpha"], cfg["mcdly_couplings"], wells,
                                        cfg["mcdly_refinements"])
            else:
                rep = _cphlt_battery(cfg)
        reports[fam] = rep
    files, rows = {}, []
    for fam, rep in reports.items():
        hard = fam in HARD_FAMILIES
        ok = rep.passed if hard else bool(rep.extra.get("stable", True))
        files[f"verify_{fam}.json"] = dumps({**rep.to_dict(), "hard": hard, "passed": ok})
        if cfg["dump_cases"] and rep.table:
            files[f"verify_{fam}_cases.csv"] = _cases_csv(rep)
        rows.append((fam, "hard" if hard else "soft", ok, rep.cases, float(rep.worst_margin),
                     float(rep.empirical_constant)))
    files["verify_summary.csv"] = csv_text(
        ("family", "kind", "passed", "cases", "worst_margin", "empirical_constant"), rows)
    seeds = {k: cfg[k] for k in ("pullout_seed", "monotone_seed")}
    bad = [f for f, r in reports.items() if f in HARD_FAMILIES and not r.passed]
    return files, {"families": fams}, seeds, (f"hard families failed: {bad}" if bad else None)


def _ims_battery(cfg):
    from .inequalities import InequalityReport, ims_identity_test, smooth_partition
    from .radial import build_channel

    table, worst = [], 0.0
    for h in cfg["ims_spacings"]:
        grid = RadialGrid.from_extent(cfg["ims_extent"], h)
        for ell in cfg["ims_ells"]:
            op = build_channel(grid, ell, -1.0 / grid.r)
            m = op.kinetic + np.diag(op.potential)
            norm = float(np.linalg.norm(m, 2))
            for R in cfg["ims_radii"]:
                res = ims_identity_test(m, smooth_partition(grid, R)) / norm
                worst = max(worst, res)
                table.append({"spacing": h, "ell": ell, "R": R, "relative_residual": res})
    return InequalityReport("ims", len(table), cfg["ims_tol"] - worst, np.nan, table,
                            {"worst_relative_residual": worst, "tolerance": cfg["ims_tol"],
                             "passed": bool(worst <= cfg["ims_tol"])})


def _cphlt_battery(cfg):
    from .inequalities import InequalityReport
    from .pauli import FieldSpec, LatticeBox, build_gauge, cphlt_check, gaussian_site_potential

    table, per_N = [], []
    for N in cfg["cphlt_N"]:
        box = LatticeBox(cfg["cphlt_L"], N)
        gauge = build_gauge(box, FieldSpec("bump", amplitude=cfg["cphlt_amplitude"],
                                           radius=cfg["cphlt_radius"]))
        pots = [gaussian_site_potential(box, d, cfg["cphlt_width"]) for d in cfg["cphlt_depths"]]
        rep = cphlt_check(gauge, pots)
        per_N.append(rep.empirical_constant)
        for row in rep.table:
            table.append({"N": N, "method": rep.extra["method"], **row})
    pos = [c for c in per_N if np.isfinite(c) and c > 0]
    drift = max(pos) / min(pos) if pos else np.nan
    return InequalityReport("cphlt", len(table), np.nan, per_N[-1], table,
                            {"per_grid_constant": per_N, "drift": drift,
                             "topology": "periodic torus",
                             "stable": bool(pos and drift <= 2.0)})


def run_pauli(cfg, sw):
    import scipy.sparse as sp

    from .pauli import (FieldSpec, LatticeBox, SpinorOperator, build_gauge, build_pauli,
                        cphlt_check, gaussian_site_potential, lowest_eigenvalue,
                        magnetic_laplacian)

    try:
        boxes = [LatticeBox(cfg["L"], N) for N in cfg["N"]]
        spec = FieldSpec(cfg["field"], flux=cfg["flux"], amplitude=cfg["amplitude"],
                         radius=cfg["radius"])
        gauges = [build_gauge(b, spec) for b in boxes[:1]]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not boxes:
        raise ConfigError("N list is empty")
    rows, reports = [], []
    for box in boxes:
        with sw.stage(f"N={box.N}"):
            gauge = build_gauge(box, spec)
            P = build_pauli(gauge)
            lam = lowest_eigenvalue(P)
            lap = sp.kron(magnetic_laplacian(gauge), sp.identity(2, format="csr"), format="csr")
            lam_scalar = lowest_eigenvalue(SpinorOperator(lap, gauge.ident))
            rows.append((box.N, box.a, gauge.field_energy, lam, lam_scalar,
                         P.hermiticity_defect()))
            if cfg["cphlt"]:
                pots = [gaussian_site_potential(box, d, cfg["width"]) for d in cfg["depths"]]
                rep = cphlt_check(gauge, pots, coulomb=cfg["coulomb"])
                reports.append(rep.to_dict())
    mags = [abs(r[3]) for r in rows]
    decreasing = all(b < a for a, b in zip(mags, mags[1:]))
    zeeman_ok = all(r[3] <= r[4] + 1e-10 for r in rows)
    summary = {"field": gauges[0].ident, "topology": "periodic torus",
               "min_eig": {str(r[0]): r[3] for r in rows},
               "min_eig_decreasing": decreasing, "zeeman_lowers_bottom": zeeman_ok,
               "cphlt": reports}
    files = {
        "pauli.csv": csv_text(("N", "a", "field_energy", "min_eig", "min_eig_without_zeeman",
                               "hermiticity_defect"), rows),
        "pauli.json": dumps(summary),
    }
    fail = None
    if not zeeman_ok:
        fail = "Zeeman term raised the bottom of the spectrum"
    elif spec.kind == "constant" and not decreasing:
        fail = f"|min eigenvalue| not strictly decreasing along N: {mags}"
    return files, {"field": gauges[0].ident, "lattice": [f"L={_fmt(b.L)},N={b.N}" for b in boxes]}, \
        {}, fail


RUNNERS = {"tf": run_tf, "semiclassics": run_semiclassics, "scott": run_scott,
           "verify": run_verify, "pauli": run_pauli}

NUMERIC_ERRORS = (RuntimeError, ArithmeticError, np.linalg.LinAlgError, SpectralDomainError,
                  AsymmetricMatrixError)


def execute(command: str, cfg: dict, out_dir: str) -> int:
    """Run one command with a resolved config and write outputs plus manifest."""
    from .tf import TFResidualError

    sw = Stopwatch()
    try:
        files, ids, seeds, fail = RUNNERS[command](cfg, sw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TFResidualError, *NUMERIC_ERRORS) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = RunManifest(command=command, config=cfg, identifiers=ids, seeds=seeds,
                           versions=RunManifest.current_versions(), started=sw.started,
                           wall_clock=sw.elapsed, stages=dict(sw.stages),
                           status="ok" if fail is None else f"failed: {fail}")
    write_outputs(out_dir, files, manifest)
    if fail is not None:
        print(f"numeric failure: {fail}", file=sys.stderr)
        return EXIT_NUMERIC
    for name in sorted(manifest.outputs):
        print(os.path.join(out_dir, name))
    return EXIT_OK


def rerun(manifest_path: str, out_dir: str) -> int:
    """Repeat a recorded run and compare output digests."""
    try:
        old = RunManifest.load(manifest_path)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: cannot load manifest: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if old.command not in RUNNERS:
        print(f"error: unknown command {old.command!r} in manifest", file=sys.stderr)
        return EXIT_USAGE
    if os.path.abspath(out_dir) == os.path.abspath(os.path.dirname(manifest_path)):
        print("error: rerun needs a fresh output directory", file=sys.stderr)
        return EXIT_USAGE
    # round-trip through the option parser so stored values are re-validated
    overrides = {k: _to_text(v) for k, v in old.config.items()}
    try:
        cfg = resolve(old.command, overrides=overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code = execute(old.command, cfg, out_dir)
    if code == EXIT_USAGE:
        return code
    new = RunManifest.load(os.path.join(out_dir, "manifest.json"))
    same = new.outputs == old.outputs
    for name in sorted(set(old.outputs) | set(new.outputs)):
        status = "identical" if old.outputs.get(name) == new.outputs.get(name) else "DIFFERS"
        print(f"{name}: {status}")
    return code if same else EXIT_NUMERIC


def _to_text(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(_to_text(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scottlab",
        description="Thomas-Fermi, Scott-term and operator-inequality computations.",
        epilog="Exit status: 0 success, 1 numeric failure, 2 usage or config error.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"tf": "Thomas-Fermi profile, atoms and Z^(7/3) scaling",
             "semiclassics": "phase-space identity and semiclassical parameters",
             "scott": "localized traces and S_2(alpha) estimates",
             "verify": "operator-inequality batteries",
             "pauli": "lattice Pauli operator spectra and the critical HLT battery"}
    for name, opts in OPTIONS.items():
        sp_ = sub.add_parser(name, help=helps[name], description=helps[name])
        sp_.add_argument("--config", metavar="FILE",
                         help=f"INI file with a [{name}] section")
        sp_.add_argument("--out", metavar="DIR", default=f"out-{name}",
                         help="output directory (default: %(default)s)")
        for k, o in opts.items():
            sp_.add_argument(f"--{k.replace('_', '-')}", dest=k, metavar=o.kind.upper(),
                             help=f"{o.help} (default: {o.default or 'empty'})")
    rp = sub.add_parser("rerun", help="repeat a run from its manifest and compare digests")
    rp.add_argument("manifest")
    rp.add_argument("--out", metavar="DIR", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "rerun":
        return rerun(args.manifest, args.out)
    overrides = {k: getattr(args, k) for k in OPTIONS[args.command]}
    try:
        cfg = resolve(args.command, args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute(args.command, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
