"""Tests for engine/geometry.py — domains, fold, projection, stick breaking."""
import numpy as np
import pytest
from scipy import stats

from engine.errors import BoundaryDegeneracyError
from engine.geometry import (
    Domain, contains, fold, fold_point, parse_domain, project, stick_break,
    stick_break_inv, stick_break_logdet, uniform_sample,
)
from engine.rng import make_rng


# --- domains ---

def test_parse_domain_round_trip():
    """str(Domain) parses back to the same domain."""
    for d in (Domain.interval(), Domain.cube(3), Domain.simplex(100)):
        assert parse_domain(str(d)) == d


def test_interval_must_be_one_dimensional():
    with pytest.raises(ValueError):
        Domain('interval', 2)


def test_unknown_domain_kind():
    with pytest.raises(ValueError):
        parse_domain('sphere:2')


# --- fold ---

def test_fold_examples():
    """1.3 -> 0.7, -0.2 -> 0.2, 2.5 -> 0.5, points inside unchanged."""
    assert fold(1.3) == pytest.approx(0.7, abs=1e-12)
    assert fold(-0.2) == pytest.approx(0.2, abs=1e-12)
    assert fold(2.5) == pytest.approx(0.5, abs=1e-12)
    assert fold(0.42) == 0.42


def test_fold_large_argument():
    """Large inputs reduce by exact modulus, no iteration."""
    assert fold(1e6 + 0.25) == pytest.approx(0.25, abs=1e-9)


def test_fold_even_and_two_periodic():
    """fold(x) = fold(-x) = fold(x + 2)."""
    x = np.linspace(-5.0, 5.0, 1001)
    np.testing.assert_allclose(fold(x), fold(-x), atol=1e-12)
    np.testing.assert_allclose(fold(x), fold(x + 2.0), atol=1e-12)


def test_fold_is_one_lipschitz():
    r = make_rng(0)
    x, y = r.normal(0, 3, 5000), r.normal(0, 3, 5000)
    assert np.all(np.abs(fold(x) - fold(y)) <= np.abs(x - y) + 1e-12)


def test_fold_idempotent_on_unit_interval():
    x = np.linspace(0.0, 1.0, 101)
    np.testing.assert_array_equal(fold(fold(x)), fold(x))


def test_fold_rejects_non_finite():
    with pytest.raises(ValueError):
        fold(np.nan)
    with pytest.raises(ValueError):
        fold(np.inf)


def test_fold_point_componentwise():
    out = fold_point(np.array([1.3, -0.2]), Domain.cube(2))
    np.testing.assert_allclose(out, [0.7, 0.2], atol=1e-12)


def test_fold_point_rejects_simplex():
    with pytest.raises(ValueError):
        fold_point(np.array([0.2, 0.3]), Domain.simplex(2))


# --- projection ---

def test_project_clamps_on_cube():
    np.testing.assert_array_equal(project(np.array([1.3, -0.2]), Domain.cube(2)), [1.0, 0.0])


def test_project_interior_is_identity():
    p = np.array([0.2, 0.7])
    np.testing.assert_array_equal(project(p, Domain.cube(2)), p)


def test_project_simplex_example():
    """[0.8, 0.8] lands on the midpoint of the long face."""
    np.testing.assert_allclose(project(np.array([0.8, 0.8]), Domain.simplex(2)), [0.5, 0.5], atol=1e-12)


def test_project_simplex_matches_grid_search():
    """Nearest point agrees with a brute-force grid minimization."""
    g = np.linspace(0.0, 1.0, 401)
    a, b = np.meshgrid(g, g, indexing='ij')
    keep = a + b <= 1.0
    cand = np.stack([a[keep], b[keep]], axis=1)
    for p in ([0.9, 0.6], [1.4, -0.3], [-0.5, -0.5], [0.3, 0.95]):
        p = np.asarray(p)
        best = cand[np.argmin(((cand - p) ** 2).sum(axis=1))]
        np.testing.assert_allclose(project(p, Domain.simplex(2)), best, atol=5e-3)


def test_project_is_idempotent_and_contained():
    r = make_rng(1)
    p = r.normal(0.5, 1.0, size=(500, 3))
    for domain in (Domain.cube(3), Domain.simplex(3)):
        once = project(p, domain)
        assert contains(once, domain, tol=1e-12)
        np.testing.assert_allclose(project(once, domain), once, atol=1e-12)


# --- stick breaking ---

def test_stick_break_example():
    np.testing.assert_allclose(stick_break(np.array([0.5, 0.5, 0.5])), [0.125, 0.25, 0.5], atol=1e-15)


def test_stick_break_zero_and_vertex():
    np.testing.assert_array_equal(stick_break(np.zeros(4)), np.zeros(4))
    np.testing.assert_array_equal(stick_break(np.array([1.0, 0.0, 0.0])), [1.0, 0.0, 0.0])


def test_stick_break_inv_example():
    np.testing.assert_allclose(stick_break_inv(np.array([0.125, 0.25, 0.5])), [0.5, 0.5, 0.5], atol=1e-15)


def test_stick_break_maps_into_simplex():
    x = make_rng(2).random((10000, 5))
    assert contains(stick_break(x), Domain.simplex(5), tol=1e-12)


def test_stick_break_round_trip():
    """Interior points away from degeneracy come back within 1e-10."""
    x = make_rng(3).uniform(1e-3, 1.0 - 1e-3, size=(2000, 6))
    assert np.max(np.abs(stick_break_inv(stick_break(x)) - x)) < 1e-10


def test_stick_break_inv_degenerate_face():
    """All mass on the last coordinate leaves no stick for the others."""
    with pytest.raises(BoundaryDegeneracyError):
        stick_break_inv(np.array([0.0, 0.0, 1.0]))


def test_stick_break_inv_keeps_precision_near_the_far_wall():
    """A tiny but positive remaining stick is interior, not a degenerate face."""
    x = np.array([0.5, 0.999, 0.999, 0.999, 0.999, 0.999])
    np.testing.assert_allclose(stick_break_inv(stick_break(x)), x, rtol=0, atol=1e-10)
    batch = np.array([[1e-3, 1 - 1e-3, 1 - 1e-3], [1 - 1e-3, 1 - 1e-3, 1 - 1e-3]])
    assert np.max(np.abs(stick_break_inv(stick_break(batch)) - batch)) < 1e-10


def test_stick_break_logdet_one_dimensional():
    assert stick_break_logdet(np.array([0.37])) == 0.0


def test_stick_break_logdet_matches_finite_differences():
    x = np.array([0.5, 0.5, 0.5])
    h = 1e-6
    jac = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        jac[:, j] = (stick_break(x + e) - stick_break(x - e)) / (2 * h)
    _, expected = np.linalg.slogdet(jac)
    assert stick_break_logdet(x) == pytest.approx(expected, abs=1e-6)


def test_stick_break_logdet_collapses():
    """x_j -> 1 for j >= 2 drives the log-det to -inf."""
    assert stick_break_logdet(np.array([0.3, 1.0])) == -np.inf
    assert stick_break_logdet(np.array([0.3, 1.0 - 1e-12])) < -20


# --- uniform sampling ---

def test_uniform_interval_mean():
    x = uniform_sample(Domain.interval(), make_rng(4), 10 ** 6)
    assert x.shape == (10 ** 6, 1)
    assert abs(x.mean() - 0.5) < 0.002


def test_uniform_cube_contained():
    x = uniform_sample(Domain.cube(2), make_rng(5), 1000)
    assert contains(x, Domain.cube(2))


def test_uniform_simplex_coordinate_means():
    """Each of the d + 1 barycentric coordinates has mean 1/(d + 1)."""
    y = uniform_sample(Domain.simplex(3), make_rng(6), 200000)
    assert contains(y, Domain.simplex(3), tol=1e-12)
    full = np.concatenate([y, 1.0 - y.sum(axis=1, keepdims=True)], axis=1)
    np.testing.assert_allclose(full.mean(axis=0), 0.25, atol=0.005)


def test_uniform_simplex_marginal_is_beta():
    y = uniform_sample(Domain.simplex(3), make_rng(7), 20000)
    assert stats.kstest(y[:, 0], stats.beta(1, 3).cdf).statistic < 0.012
