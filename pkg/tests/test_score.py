"""Tests for engine/score.py — toy mixtures and their closed-form scores."""
import numpy as np
import pytest
from scipy.integrate import trapezoid

from engine.errors import DensityUnderflowError
from engine.metrics import wasserstein1_1d
from engine.rng import make_rng
from engine.score import (
    ExactScore, PerturbedScore, ToyDistribution, ZeroScore, cdf_from_density, class_posterior,
    exact_score, get_toy, toy_cdf_1d, toy_log_density,
)


def test_exact_score_matches_finite_differences(schedule):
    toy = get_toy('1d-two-bump')
    x = np.linspace(0.02, 0.98, 25)[:, None]
    h = 1e-6
    for t in (0.0, 0.05, 0.3, 0.8):
        fd = (toy_log_density(toy, x + h, t, schedule) - toy_log_density(toy, x - h, t, schedule)) / (2 * h)
        np.testing.assert_allclose(exact_score(toy, x, t, schedule)[:, 0], fd, atol=1e-5, rtol=1e-6)


def test_exact_score_two_dimensional_finite_differences(schedule):
    toy = get_toy('2d-mixture')
    x = make_rng(0).uniform(0.05, 0.95, size=(20, 2))
    h = 1e-6
    s = exact_score(toy, x, 0.1, schedule)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (toy_log_density(toy, x + e, 0.1, schedule) - toy_log_density(toy, x - e, 0.1, schedule)) / (2 * h)
        np.testing.assert_allclose(s[:, j], fd, atol=1e-5, rtol=1e-6)


def test_exact_score_zero_at_walls(schedule):
    toy = get_toy('1d-two-bump')
    for t in (0.0, 0.2, 0.9):
        s = exact_score(toy, np.array([[0.0], [1.0]]), t, schedule)
        assert np.abs(s).max() < 1e-6


def test_exact_score_accepts_per_point_times(schedule):
    toy = get_toy('1d-two-bump')
    x = np.full((3, 1), 0.4)
    t = np.array([0.1, 0.5, 0.9])
    batched = exact_score(toy, x, t, schedule)
    for i in range(3):
        np.testing.assert_allclose(batched[i], exact_score(toy, x[i:i + 1], t[i], schedule)[0], rtol=1e-12)


def test_density_normalized(schedule):
    toy = get_toy('1d-boundary')
    grid = np.linspace(0.0, 1.0, 20001)
    dens = np.exp(toy_log_density(toy, grid[:, None], 0.0, schedule))
    assert trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-4)


def test_sampling_matches_density(schedule):
    toy = get_toy('1d-two-bump')
    draws = toy.sample(50000, make_rng(1), t=0.2, schedule=schedule)
    assert wasserstein1_1d(toy_cdf_1d(toy, 0.2, schedule), draws) < 0.01


def test_uniform_toy_has_flat_density(schedule):
    toy = get_toy('uniform', 3)
    x = make_rng(2).random((50, 3))
    np.testing.assert_allclose(toy_log_density(toy, x, 0.0, schedule), 0.0, atol=1e-9)
    assert np.abs(exact_score(toy, x, 0.0, schedule)).max() < 1e-9


def test_class_posterior_sums_to_one(schedule):
    toy = get_toy('1d-two-class')
    x = np.linspace(0, 1, 11)[:, None]
    total = class_posterior(toy, 0, x, 0.1, schedule) + class_posterior(toy, 1, x, 0.1, schedule)
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_conditional_keeps_labelled_components():
    toy = get_toy('1d-two-class')
    cond = toy.conditional(1)
    assert cond.weights == (1.0,)
    assert cond.centers == ((0.75,),)
    with pytest.raises(ValueError):
        get_toy('1d-two-bump').conditional(0)


def test_unknown_toy_and_wrong_dimension():
    with pytest.raises(ValueError):
        get_toy('three-moons')
    with pytest.raises(ValueError):
        get_toy('2d-mixture', 3)


def test_invalid_mixture_rejected():
    with pytest.raises(ValueError):
        ToyDistribution((0.5, 0.6), ((0.1,), (0.2,)), (0.01, 0.01))
    with pytest.raises(ValueError):
        ToyDistribution((1.0,), ((1.5,),), (0.01,))


def test_underflow_reported_for_far_point(schedule):
    toy = ToyDistribution((1.0,), ((0.0,),), (1e-6,))
    with pytest.raises(DensityUnderflowError):
        exact_score(toy, np.array([[1.0]]), 0.0, schedule)


def test_zero_and_perturbed_scores(schedule):
    x = np.linspace(0, 1, 5)[:, None]
    assert np.all(ZeroScore(1)(x, 0.5) == 0.0)
    perturbed = PerturbedScore(ExactScore(get_toy('1d-two-bump'), schedule), 0.3)
    walls = perturbed(np.array([[0.0], [1.0]]), 0.5)
    assert np.abs(walls).max() < 1e-6
    middle = perturbed(np.array([[0.5]]), 0.5) - ExactScore(get_toy('1d-two-bump'), schedule)(np.array([[0.5]]), 0.5)
    assert middle[0, 0] == pytest.approx(0.3)


def test_cdf_from_density_uniform():
    grid = np.linspace(0.0, 1.0, 101)
    cdf = cdf_from_density(grid, np.ones_like(grid))
    assert cdf(0.25) == pytest.approx(0.25)
    assert cdf(1.0) == pytest.approx(1.0)
