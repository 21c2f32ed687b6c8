import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scottlab.numerics import (AsymmetricMatrixError, CutoffProfile, RadialGrid,
                               SpectralDomainError, chandrasekhar_symbol, eig_sym,
                               integrate_uniform, matrix_function, negative_part_sum,
                               quad_radial, richardson, smoothstep5, smoothstep_cinf)


def random_symmetric(seed, n=8):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def random_psd(seed, n=8):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T


# grids ---------------------------------------------------------------------

def test_grid_points_and_wall():
    g = RadialGrid(0.5, 10)
    assert np.allclose(g.r, 0.5 * np.arange(1, 11))
    assert g.r_max == pytest.approx(5.5)
    assert np.all(np.diff(g.r) > 0)


@pytest.mark.parametrize("h,n", [(0.0, 10), (-1.0, 10), (0.1, 7), (0.1, 8.5)])
def test_grid_rejects_bad_input(h, n):
    with pytest.raises(ValueError):
        RadialGrid(h, n)


def test_grid_refined_keeps_wall():
    g = RadialGrid.from_extent(10.0, 0.1)
    f = g.refined()
    assert f.r_max == pytest.approx(g.r_max)
    assert f.spacing == pytest.approx(g.spacing / 2)


# eigensolver and matrix functions -------------------------------------------

def test_eig_sym_trivial_cases():
    w, _ = eig_sym(np.eye(3))
    assert np.allclose(w, 1.0)
    w, _ = eig_sym(np.diag([5.0, -2.0, 0.0]))
    assert np.allclose(w, [-2.0, 0.0, 5.0])


@pytest.mark.parametrize("seed", range(5))
def test_eig_sym_reconstruction(seed):
    m = random_symmetric(seed)
    w, v = eig_sym(m)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v.T @ v, np.eye(8), atol=1e-10)
    assert np.max(np.abs(v @ np.diag(w) @ v.T - m)) < 1e-9
    norm = np.linalg.norm(m, 2)
    for k in range(8):
        assert np.linalg.norm(m @ v[:, k] - w[k] * v[:, k]) <= 1e-9 * norm


def test_asymmetric_input_is_rejected_with_diagnostic():
    m = np.array([[1.0, 2.0], [2.1, 1.0]])
    with pytest.raises(AsymmetricMatrixError) as exc:
        eig_sym(m)
    assert exc.value.asymmetry == pytest.approx(0.1)


@pytest.mark.parametrize("seed", range(3))
def test_matrix_function_oracles(seed):
    m = random_symmetric(seed)
    assert np.allclose(matrix_function(m, lambda t: t), m, atol=1e-10)
    assert np.allclose(matrix_function(m, lambda t: t * t), m @ m, atol=1e-9)
    p = random_psd(seed)
    root = matrix_function(p, np.sqrt)
    assert np.max(np.abs(root @ root - p)) < 1e-8
    fm = matrix_function(m, np.exp)
    scale = np.linalg.norm(m, 2) * np.linalg.norm(fm, 2)
    assert np.max(np.abs(fm @ m - m @ fm)) <= 1e-8 * scale


def test_matrix_function_reports_offending_eigenvalue():
    with pytest.raises(SpectralDomainError) as exc:
        matrix_function(np.diag([1.0, -4.0]), np.sqrt)
    assert exc.value.eigenvalue == pytest.approx(-4.0)


def test_negative_part_sum_examples():
    assert negative_part_sum([1, 2, 3]) == 0.0
    assert negative_part_sum([-1, -2, 3]) == -3.0
    assert negative_part_sum(np.linalg.eigvalsh(np.diag([-0.5, 0.0, 0.25]))) == -0.5


@given(arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e6, 1e6)))
def test_negative_part_sum_is_nonpositive_and_order_free(w):
    s = negative_part_sum(w)
    assert s <= 0.0
    assert s == negative_part_sum(w[::-1])
    assert s == pytest.approx(np.minimum(w, 0).sum(), rel=1e-12, abs=1e-9)


@given(st.integers(0, 10_000), st.floats(1e-3, 10.0), st.floats(1.0, 3.0))
def test_chandrasekhar_matrix_is_psd_and_decreasing_in_alpha(seed, alpha, factor):
    m = random_psd(seed, 6)
    fa = matrix_function(m, lambda t: chandrasekhar_symbol(np.maximum(t, 0), alpha))
    fb = matrix_function(m, lambda t: chandrasekhar_symbol(np.maximum(t, 0), alpha * factor))
    nrm = max(np.linalg.norm(fa, 2), 1.0)
    assert np.linalg.eigvalsh(fa)[0] >= -1e-10 * nrm
    assert np.linalg.eigvalsh(fa - fb)[0] >= -1e-10 * nrm


@given(st.floats(0.0, 1e8), st.floats(1e-4, 1e2))
def test_chandrasekhar_symbol_below_massless(t, alpha):
    # sqrt(a^-2 t + a^-4) - a^-2 <= a^-1 sqrt(t) and <= t/2
    f = chandrasekhar_symbol(t, alpha)
    assert 0.0 <= f <= np.sqrt(t) / alpha * (1 + 1e-12) + 1e-300
    assert f <= 0.5 * t * (1 + 1e-12)


# quadrature ----------------------------------------------------------------

def test_quad_radial_zero_and_gaussian():
    g = RadialGrid.from_extent(10.0, 0.01)
    assert quad_radial(np.zeros(g.n_points), g) == 0.0
    val = quad_radial(np.exp(-g.r**2), g)
    assert val == pytest.approx(np.pi**1.5, rel=1e-6)


def test_quad_radial_inverse_square():
    g = RadialGrid.from_extent(10.0, 0.01)
    assert quad_radial(g.r**-2.0, g) == pytest.approx(4 * np.pi * g.r_last, rel=1e-8)


def test_quad_radial_rejects_length_mismatch():
    g = RadialGrid(0.1, 20)
    with pytest.raises(ValueError):
        quad_radial(np.ones(19), g)


def test_quad_radial_singular_integrand_converges():
    # 4 pi int e^-r r^{3/2} dr = 4 pi Gamma(5/2)
    exact = 4 * np.pi * 0.75 * np.sqrt(np.pi)
    errs = []
    for h in (0.02, 0.01, 0.005):
        g = RadialGrid.from_extent(60.0, h)
        errs.append(abs(quad_radial(np.exp(-g.r) * g.r**-0.5, g) - exact))
    assert errs[-1] < 1e-6 * exact
    assert errs[0] / errs[-1] > 4.0


def test_integrate_uniform_cumulative_matches_total():
    x = 0.01 * np.arange(1, 501)
    F = np.cos(x)
    run = integrate_uniform(F, 0.01, cumulative=True)
    assert run[-1] == pytest.approx(integrate_uniform(F, 0.01))
    assert run[-1] == pytest.approx(np.sin(5.0), rel=1e-6)


def test_richardson_removes_quadratic_error():
    vals = [1.0 + 0.3 * h**2 + 0.1 * h**4 for h in (0.4, 0.2, 0.1)]
    assert richardson(vals)[-1] == pytest.approx(1.0, abs=1e-14)


# cutoff profiles -------------------------------------------------------------

@pytest.mark.parametrize("name", ["smoothstep", "cinf"])
def test_profile_support_and_partner(name):
    p = CutoffProfile(name)
    t = np.linspace(0, 3, 10_000)
    th = p.theta(t)
    assert np.all(th[t <= 1] == 1.0)
    assert np.all(th[t >= 2] == 0.0)
    assert np.all((0 <= th) & (th <= 1))
    assert np.max(np.abs(th**2 + p.partner(t) ** 2 - 1.0)) < 1e-12
    assert np.all(np.diff(th) <= 0)


def test_profile_sampling_scales_with_R():
    p = CutoffProfile()
    g = RadialGrid.from_extent(50.0, 0.1)
    assert np.allclose(p.sample(g, 10.0), p.theta(g.r / 10.0))


def test_unknown_profile_rejected():
    with pytest.raises(ValueError):
        CutoffProfile("triangle")


@given(st.floats(0.0, 1.0))
def test_switches_are_monotone_maps_of_unit_interval(x):
    for s in (smoothstep5, smoothstep_cinf):
        v = float(s(x))
        assert 0.0 <= v <= 1.0
        assert float(s(min(x + 1e-3, 1.0))) >= v - 1e-15
