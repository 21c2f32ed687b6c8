import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scottlab.inequalities import (CRITICAL_COUPLING, daubechies_constant, gaussian_well,
                                   hardy_ladder, hypothesis_guard, ims_identity_test,
                                   mcdly_constant, monotone_shift_test, pullout_test,
                                   random_resolution, shifted_root, smooth_partition)
from scottlab.numerics import AsymmetricMatrixError, CutoffProfile, RadialGrid
from scottlab.radial import KineticModel, apply_kinetic_model, build_channel

# pull-out ----------------------------------------------------------------


@given(st.integers(0, 10_000), st.integers(1, 8), st.integers(1, 5))
def test_random_resolution_is_symmetric_partition(seed, n, parts):
    S = random_resolution(np.random.default_rng(seed), n, parts)
    assert len(S) == parts
    for s in S:
        assert np.allclose(s, s.T, atol=1e-14)
    assert np.max(np.abs(sum(s @ s for s in S) - np.eye(n))) < 1e-12


def test_resolution_operators_do_not_commute():
    S = random_resolution(np.random.default_rng(0), 5, 3)
    assert np.max(np.abs(S[0] @ S[1] - S[1] @ S[0])) > 1e-3


def test_pullout_battery_has_no_violations():
    rep = pullout_test(trials=300)
    assert rep.passed
    assert rep.extra["violations"] == 0
    assert rep.cases == 300 == len(rep.table)
    assert np.isfinite(rep.worst_margin) and rep.worst_margin >= -1e-10


def test_pullout_is_deterministic_per_seed():
    a = pullout_test(trials=20, seed=3)
    b = pullout_test(trials=20, seed=3)
    assert a.table == b.table


def test_pullout_linear_exponent_is_equality():
    rep = pullout_test(trials=50, a=1.0)
    assert rep.passed
    assert abs(rep.worst_margin) < 1e-12


@pytest.mark.parametrize("kw", [{"n": 9}, {"parts": 6}, {"a": 0.0}, {"a": 2.0}, {"trials": 0}])
def test_pullout_input_validation(kw):
    with pytest.raises(ValueError):
        pullout_test(**kw)


# IMS ---------------------------------------------------------------------

@given(st.integers(0, 10_000), st.integers(2, 4))
def test_ims_identity_on_random_matrices(seed, parts):
    rng = np.random.default_rng(seed)
    n = 20
    a = rng.standard_normal((n, n))
    h = a + a.T
    raw = rng.uniform(0.1, 1.0, (parts, n))
    thetas = raw / np.sqrt((raw**2).sum(axis=0))
    assert ims_identity_test(h, list(thetas)) <= 1e-12 * np.linalg.norm(h, 2)


@pytest.mark.parametrize("kind", ["nonrelativistic", "chandrasekhar"])
def test_ims_identity_on_channel_operators(kind):
    g = RadialGrid.from_extent(20.0, 0.1)
    op = build_channel(g, 1, -1.0 / g.r)
    model = KineticModel.nonrelativistic() if kind == "nonrelativistic" else \
        KineticModel.chandrasekhar(0.3)
    h = apply_kinetic_model(op, model)
    for R in (2.0, 5.0):
        res = ims_identity_test(h, smooth_partition(g, R, CutoffProfile("cinf")))
        assert res <= 1e-12 * np.linalg.norm(h, 2)


def test_ims_rejections():
    h = np.eye(4)
    with pytest.raises(ValueError):
        ims_identity_test(h, [np.full(4, 0.5)])
    with pytest.raises(ValueError):
        ims_identity_test(h, [np.ones(3)])
    with pytest.raises(AsymmetricMatrixError):
        ims_identity_test(np.array([[0.0, 1.0], [0.0, 0.0]]), [np.ones(2)])


# scalar monotonicity -------------------------------------------------------

def test_shifted_root_endpoints():
    assert shifted_root(1.0, 0.0) == 1.0
    xi = np.geomspace(1e-3, 1e12, 200)
    v = shifted_root(1.0, xi)
    assert np.all(np.diff(v) < 0)
    assert v[-1] == pytest.approx(0.5e-12, rel=1e-12)


def test_monotone_shift_battery():
    rep = monotone_shift_test()
    assert rep.passed and rep.extra["violations"] == 0 and rep.cases == 100_000


@given(st.floats(-1e3, 1e3), st.floats(0, 1e6), st.floats(0, 1e6))
def test_shifted_root_non_increasing(a, x, y):
    lo, hi = min(x, y), max(x, y)
    assert shifted_root(a, lo) >= shifted_root(a, hi) - 1e-12 * abs(a)


# fitted constants ------------------------------------------------------

def test_daubechies_constant_is_finite_and_battery_monotone():
    one = daubechies_constant(0.1, [gaussian_well(4.0)], spacings=(0.05, 0.025))
    two = daubechies_constant(0.1, [gaussian_well(4.0), gaussian_well(16.0)],
                              spacings=(0.05, 0.025))
    assert np.isfinite(one.empirical_constant) and one.empirical_constant > 0
    assert two.empirical_constant >= one.empirical_constant
    assert two.extra["drift"] <= 2.0
    # the fitted constant makes every case hold
    assert two.worst_margin >= -1e-12


def test_daubechies_rejects_negative_wells():
    with pytest.raises(ValueError):
        daubechies_constant(0.1, [lambda r: -np.exp(-r)], spacings=(0.05,))
    with pytest.raises(ValueError):
        daubechies_constant(0.0, [gaussian_well(1.0)])


def test_hypothesis_guard():
    log = hypothesis_guard(1.0, 0.5)
    assert log["M"] == 1 and log["nu_alpha"] == 0.5
    with pytest.raises(ValueError):
        hypothesis_guard(2.0, 0.5)
    with pytest.raises(ValueError):
        hypothesis_guard(1.0, 0.1, centers=[(0, 0, 0), (0, 0, 0.5)])
    assert hypothesis_guard(1.0, 0.1, centers=[(0, 0, 0), (0, 0, 1.0)])["M"] == 2


def test_mcdly_small_coupling_needs_no_constant_term():
    rep = mcdly_constant(0.25, [1 / 128], [gaussian_well(0.0), gaussian_well(4.0)],
                         refinements=(4, 8))
    zero_well = [row for row in rep.table if row["well"] == 0]
    assert all(row["lhs"] == 0.0 for row in zero_well)
    assert np.all(np.isfinite(rep.extra["small_coupling_constant"]))
    assert rep.extra["no_constant_term_ok"]


def test_mcdly_critical_case_finite():
    rep = mcdly_constant(0.25, [CRITICAL_COUPLING], [gaussian_well(0.0)], refinements=(4, 8))
    assert np.isfinite(rep.empirical_constant) and rep.empirical_constant > 0
    assert all(row["nu_alpha"] == CRITICAL_COUPLING for row in rep.table)


# Hardy ladder -------------------------------------------------------

def test_hardy_ladder_small():
    rep = hardy_ladder(couplings=(CRITICAL_COUPLING,), sizes=(255, 511, 1023))
    assert rep.passed
    vals = rep.table[0]["min_eig"]
    assert min(vals) >= -0.01


def test_hardy_ladder_needs_two_grids():
    with pytest.raises(ValueError):
        hardy_ladder(sizes=(255,))
