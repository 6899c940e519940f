"""Tests for engine/guidance.py — score composition and guided sampling."""
import numpy as np
import pytest

from engine.geometry import Domain, contains
from engine.guidance import (
    BayesClassifierGradient, GuidedScore, compose_cfg, compose_classifier, exact_guided_score,
    tilted_cdf_1d, tilted_log_density,
)
from engine.metrics import wasserstein1_1d
from engine.rng import make_rng
from engine.samplers import SamplerConfig, run_sampler
from engine.score import ExactScore, class_posterior, get_toy, toy_log_density

LABEL = 1


@pytest.fixture(scope='module')
def toy():
    return get_toy('1d-two-class')


@pytest.fixture
def grid():
    return np.linspace(0.05, 0.95, 19)[:, None]


def fd_gradient(fn, x, h=1e-6):
    return (fn(x + h) - fn(x - h)) / (2 * h)


# --- composition ---

def test_zero_weight_is_conditional(toy, schedule, grid):
    a = make_rng(0).standard_normal((5, 1))
    b = make_rng(1).standard_normal((5, 1))
    np.testing.assert_array_equal(compose_cfg(a, b, 0.0), a)
    guided = exact_guided_score(toy, LABEL, 0.0, schedule)
    conditional = ExactScore(toy.conditional(LABEL), schedule)
    np.testing.assert_allclose(guided(grid, 0.4), conditional(grid, 0.4), rtol=1e-12, atol=1e-12)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        compose_cfg(np.zeros((3, 1)), np.zeros((3, 2)), 1.0)
    with pytest.raises(ValueError):
        compose_classifier(np.zeros((3, 1)), np.zeros((4, 1)), 1.0)


def test_cfg_is_linear_in_weight():
    a = make_rng(3).standard_normal((7, 2))
    b = make_rng(4).standard_normal((7, 2))
    for w in (0.0, 0.5, 1.0, 2.5, 4.0):
        np.testing.assert_allclose(compose_cfg(a, b, w), a + w * (a - b), rtol=1e-12, atol=1e-12)
    second_difference = compose_cfg(a, b, 4.0) - 2 * compose_cfg(a, b, 2.0) + compose_cfg(a, b, 0.0)
    np.testing.assert_allclose(second_difference, 0.0, atol=1e-12)


def test_guided_score_needs_its_parts(toy, schedule):
    uncond = ExactScore(toy, schedule)
    with pytest.raises(ValueError):
        GuidedScore(uncond, 1.0)
    with pytest.raises(ValueError):
        GuidedScore(uncond, 1.0, mode='classifier')
    with pytest.raises(ValueError):
        GuidedScore(uncond, 1.0, conditional=uncond, mode='dpm')


@pytest.mark.parametrize('w', [0.0, 1.0, 4.0])
def test_classifier_at_w_plus_one_equals_cfg(w, toy, schedule, grid):
    cfg = exact_guided_score(toy, LABEL, w, schedule, mode='cfg')
    classifier = exact_guided_score(toy, LABEL, w, schedule, mode='classifier')
    np.testing.assert_allclose(classifier(grid, 0.3), cfg(grid, 0.3), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize('w', [1.0, 4.0])
def test_guided_score_is_gradient_of_tilted_density(w, toy, schedule, grid):
    t = 0.4
    guided = exact_guided_score(toy, LABEL, w, schedule)(grid, t)[:, 0]
    fd = fd_gradient(lambda x: tilted_log_density(toy, LABEL, w, x, t, schedule), grid)
    np.testing.assert_allclose(guided, fd, atol=1e-4)


def test_unit_classifier_weight_targets_posterior_times_marginal(toy, schedule, grid):
    """s + grad log q(c|x) is the gradient of log[q(c|x) q(x)]."""
    t = 0.5
    score = GuidedScore(ExactScore(toy, schedule), 1.0,
                        classifier_grad=BayesClassifierGradient(toy, LABEL, schedule), mode='classifier')

    def log_target(x):
        return np.log(class_posterior(toy, LABEL, x, t, schedule)) + toy_log_density(toy, x, t, schedule)

    np.testing.assert_allclose(score(grid, t)[:, 0], fd_gradient(log_target, grid), atol=1e-4)


def test_guided_score_zero_at_walls(toy, schedule):
    walls = np.array([[0.0], [1.0]])
    for w in (1.0, 4.0):
        assert np.abs(exact_guided_score(toy, LABEL, w, schedule)(walls, 0.3)).max() < 1e-6


# --- sampling ---

@pytest.mark.parametrize('w', [0.0, 1.0, 4.0])
def test_guided_sampling_hits_tilted_target(w, toy, schedule):
    score = exact_guided_score(toy, LABEL, w, schedule)
    result = run_sampler(score, SamplerConfig(steps=1000, n_samples=10000), schedule, make_rng(2))
    assert wasserstein1_1d(tilted_cdf_1d(toy, LABEL, w, 0.0, schedule), result.x) < 0.03


def test_unguided_ode_hits_conditional_target(toy, schedule):
    score = exact_guided_score(toy, LABEL, 0.0, schedule)
    result = run_sampler(score, SamplerConfig(method='ode', steps=1000, n_samples=10000), schedule, make_rng(5))
    assert wasserstein1_1d(tilted_cdf_1d(toy, LABEL, 0.0, 0.0, schedule), result.x) < 0.03


def test_guided_ode_moves_toward_tilted_target(toy, schedule):
    score = exact_guided_score(toy, LABEL, 4.0, schedule)
    result = run_sampler(score, SamplerConfig(method='ode', steps=1000, n_samples=10000), schedule, make_rng(6))
    assert contains(result.x, Domain.interval())
    tilted = wasserstein1_1d(tilted_cdf_1d(toy, LABEL, 4.0, 0.0, schedule), result.x)
    unguided = wasserstein1_1d(tilted_cdf_1d(toy, LABEL, 0.0, 0.0, schedule), result.x)
    assert tilted < unguided


def test_tilted_cdf_needs_one_dimension(schedule):
    with pytest.raises(ValueError):
        tilted_cdf_1d(get_toy('2d-two-class'), LABEL, 1.0, 0.0, schedule)
