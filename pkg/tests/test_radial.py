import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from scottlab.numerics import CutoffProfile, RadialGrid
from scottlab.radial import (MAX_CHANNEL_DIM, ChannelConvergenceError, KineticModel,
                             apply_kinetic_model, build_channel, hardy_min_eig,
                             hydrogen_check, localized_negative_trace, sum_channels,
                             sum_channels_multi)


@pytest.fixture(scope="module")
def grid():
    return RadialGrid.from_extent(40.0, 0.1)


# kinetic models ----------------------------------------------------------

@pytest.mark.parametrize("model", [KineticModel.nonrelativistic(), KineticModel.massless(),
                                   KineticModel.chandrasekhar(0.3)])
def test_symbols_are_nonnegative_and_nondecreasing(model):
    t = np.linspace(0, 1e4, 5001)
    f = model(t)
    assert f[0] == 0.0
    assert np.all(f >= 0)
    assert np.all(np.diff(f) >= 0)


def test_model_validation():
    with pytest.raises(ValueError):
        KineticModel("dirac")
    with pytest.raises(ValueError):
        KineticModel.chandrasekhar(0.0)
    assert KineticModel.for_alpha(0.0).kind == "nonrelativistic"
    assert KineticModel.for_alpha(0.2).alpha == 0.2


# channel operators ---------------------------------------------------------

def test_free_channel_matches_dirichlet_laplacian():
    g = RadialGrid.from_extent(10.0, 0.01)
    w = build_channel(g, 0).kinetic_eigvals()[:4]
    exact = (np.arange(1, 5) * np.pi / g.r_max) ** 2
    assert np.allclose(w, exact, rtol=1e-4)


def test_channel_symmetry_and_centrifugal_order(grid):
    k0 = build_channel(grid, 0).kinetic
    k1 = build_channel(grid, 1).kinetic
    assert np.array_equal(k0, k0.T)
    assert np.linalg.eigvalsh(k0)[0] > 0
    assert np.linalg.eigvalsh(k1)[0] > np.linalg.eigvalsh(k0)[0]


def test_channel_rejections(grid):
    with pytest.raises(ValueError):
        build_channel(grid, -1)
    with pytest.raises(ValueError):
        build_channel(grid, 0, np.zeros(3))
    with pytest.raises(ValueError):
        build_channel(RadialGrid(1e-3, MAX_CHANNEL_DIM + 1), 0)


def test_nonrelativistic_model_is_linear(grid):
    op = build_channel(grid, 1, -1.0 / grid.r)
    m = apply_kinetic_model(op, KineticModel.nonrelativistic())
    assert np.max(np.abs(m - (0.5 * op.kinetic + np.diag(op.potential)))) <= 1e-12


def test_chandrasekhar_small_alpha_limit():
    g = RadialGrid(0.2, 50)
    op = build_channel(g, 0)
    K = op.kinetic
    nr = 0.5 * K
    alpha = 1e-3
    ch = apply_kinetic_model(op, KineticModel.chandrasekhar(alpha))
    err = np.linalg.norm(ch - nr, 2)
    # f(t) = t/2 - alpha^2 t^2 / 8 + ...
    assert err <= alpha**2 * np.linalg.norm(K, 2) ** 2
    assert err > 0


def test_massless_model_squares_back(grid):
    op = build_channel(RadialGrid(0.1, 200), 2)
    m = apply_kinetic_model(op, KineticModel.massless())
    assert np.max(np.abs(m @ m - op.kinetic)) <= 1e-8 * np.max(np.abs(op.kinetic))


@pytest.mark.parametrize("alpha", [0.05, 0.3, 2 / np.pi])
@pytest.mark.parametrize("ell", [0, 3])
def test_chandrasekhar_dominated_by_scaled_massless(alpha, ell):
    op = build_channel(RadialGrid(0.05, 300), ell)
    ch = apply_kinetic_model(op, KineticModel.chandrasekhar(alpha))
    ml = apply_kinetic_model(op, KineticModel.massless()) / alpha
    assert np.linalg.eigvalsh(ml - ch)[0] >= -1e-10 * np.linalg.norm(ml, 2)


# localized traces ------------------------------------------------------

def test_localized_trace_trivial_cases(grid):
    op = build_channel(grid, 0, np.ones(grid.n_points))
    h = apply_kinetic_model(op, KineticModel.nonrelativistic())
    assert localized_negative_trace(h, np.ones(grid.n_points)) == 0.0
    h = apply_kinetic_model(build_channel(grid, 0, -1.0 / grid.r), KineticModel.nonrelativistic())
    assert localized_negative_trace(h, np.zeros(grid.n_points)) == 0.0
    with pytest.raises(ValueError):
        localized_negative_trace(h, np.ones(3))


def test_localized_trace_hydrogen_against_dense_oracle():
    g = RadialGrid.from_extent(48.0, 0.05)
    op = build_channel(g, 0, -1.0 / g.r)
    h = apply_kinetic_model(op, KineticModel.nonrelativistic())
    phi = CutoffProfile()(g.r, 20.0)
    sand = phi[:, None] * h * phi[None, :]
    w = sla.eigh(sand, eigvals_only=True, driver="ev")
    oracle = np.sum(w[w < 0])
    assert localized_negative_trace(h, phi) == pytest.approx(oracle, abs=1e-10)
    # tridiagonal fast path inside sum_channels
    res = sum_channels(KineticModel.nonrelativistic(), -1.0 / g.r, phi, g)
    assert res.per_ell[0][1] == pytest.approx(2 * oracle, abs=1e-10)


def test_localized_trace_non_increasing_in_R():
    g = RadialGrid.from_extent(70.0, 0.05)
    h = apply_kinetic_model(build_channel(g, 0, -1.0 / g.r), KineticModel.nonrelativistic())
    vals = [localized_negative_trace(h, CutoffProfile()(g.r, R)) for R in (2, 4, 8, 16, 32)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@given(st.integers(0, 10_000))
def test_cutoff_conjugation_bound(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((12, 12))
    h = 0.5 * (a + a.T)
    phi = rng.uniform(0, 1, 12)
    w = np.linalg.eigvalsh(h)
    assert localized_negative_trace(h, phi) >= np.sum(w[w < 0]) - 1e-12


# channel sums --------------------------------------------------------

def test_repulsive_potential_gives_zero(grid):
    res = sum_channels(KineticModel.nonrelativistic(), 1.0 / grid.r, np.ones(grid.n_points),
                       grid)
    assert res.total == 0.0
    assert res.ell_max_used <= 1


def test_channel_sum_bookkeeping():
    g = RadialGrid.from_extent(40.0, 0.05)
    phi = CutoffProfile()(g.r, 12.0)
    model = KineticModel.chandrasekhar(0.4)
    res = sum_channels(model, -1.0 / g.r, phi, g)
    assert res.total == sum(c for _, c in res.per_ell)
    assert all(c <= 0 for _, c in res.per_ell)
    assert abs(res.per_ell[-1][1]) <= 1e-7 * abs(res.total)
    assert len(res.negative_counts) == len(res.per_ell)
    assert res.negative_counts[0] >= res.negative_counts[-1]
    folded = sum_channels(model, -1.0 / g.r, phi, g, spin_in_degeneracy=True)
    assert folded.total == res.total


def test_truncation_self_consistency():
    g = RadialGrid.from_extent(40.0, 0.05)
    phi = CutoffProfile()(g.r, 16.0)
    tol = 1e-7
    for model in (KineticModel.nonrelativistic(), KineticModel.chandrasekhar(0.5)):
        auto = sum_channels(model, -1.0 / g.r, phi, g, tol)
        deep = 0.0
        for ell in range(2 * auto.ell_max_used + 1):
            h = apply_kinetic_model(build_channel(g, ell, -1.0 / g.r), model)
            deep += 2 * (2 * ell + 1) * localized_negative_trace(h, phi)
        assert abs(deep - auto.total) < 2 * tol * abs(auto.total)


def test_multi_model_sum_matches_single(grid):
    phi = CutoffProfile()(grid.r, 10.0)
    models = [KineticModel.nonrelativistic(), KineticModel.chandrasekhar(0.5)]
    multi = sum_channels_multi(models, -1.0 / grid.r, phi, grid)
    for m, r in zip(models, multi):
        assert sum_channels(m, -1.0 / grid.r, phi, grid).total == r.total


def test_alpha_to_zero_recovers_nonrelativistic_trace():
    g = RadialGrid.from_extent(24.0, 0.05)
    phi = CutoffProfile()(g.r, 8.0)
    nr = sum_channels(KineticModel.nonrelativistic(), -1.0 / g.r, phi, g).total
    diffs = [abs(sum_channels(KineticModel.chandrasekhar(a), -1.0 / g.r, phi, g).total - nr)
             for a in (0.04, 0.02, 0.01)]
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[2] < 1e-2 * abs(nr)


def test_channel_convergence_failure_carries_trace(grid):
    with pytest.raises(ChannelConvergenceError) as exc:
        sum_channels(KineticModel.nonrelativistic(), -1.0 / grid.r, np.ones(grid.n_points),
                     grid, 1e-30, max_ell=2)
    assert len(exc.value.per_ell[0]) == 3


# hydrogen and Hardy ------------------------------------------------------

def test_hydrogen_spectrum():
    g = RadialGrid.from_extent(120.0, 0.1)
    rep = hydrogen_check([g, g.refined(), g.refined(4), g.refined(8)])
    assert rep.max_error < 1e-4
    assert rep.extrapolated[0][0] == pytest.approx(-0.5, abs=1e-4)
    assert rep.extrapolated[1][0] == pytest.approx(-1 / 8, abs=1e-4)
    assert rep.extrapolated[2][0] == pytest.approx(-1 / 18, abs=1e-4)
    assert rep.monotone


def test_hydrogen_requires_nested_ladder():
    with pytest.raises(ValueError):
        hydrogen_check([RadialGrid(0.1, 100), RadialGrid(0.07, 100)])


def test_hardy_without_coupling_is_positive():
    g = [RadialGrid(1 / 256, 255)]
    assert hardy_min_eig(0.0, g)[0] > 0


def test_hardy_fast_route_matches_dense():
    g = [RadialGrid(1 / 1024, 1023)]
    for c in (2 / np.pi, 0.7):
        dense = hardy_min_eig(c, g, dense_limit=4096)[0]
        fast = hardy_min_eig(c, g, dense_limit=0)[0]
        assert fast == pytest.approx(dense, abs=1e-9)


def test_hardy_rejects_negative_coupling():
    with pytest.raises(ValueError):
        hardy_min_eig(-0.1, [RadialGrid(0.1, 9)])
