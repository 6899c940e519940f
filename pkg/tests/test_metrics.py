"""Tests for engine/metrics.py — W1, sliced W1, KS and convergence helpers."""
import numpy as np
import pytest

from engine.geometry import Domain
from engine.metrics import (
    SampleSet, is_nonincreasing_within, ks_statistic_1d, self_convergence, sliced_w1, wasserstein1_1d,
)
from engine.rng import make_rng


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)


# --- W1 ---

def test_w1_identical_samples():
    a = make_rng(0).random(1000)
    assert wasserstein1_1d(a, a) == 0.0


def test_w1_point_masses_at_the_walls():
    assert wasserstein1_1d(np.zeros(10), np.ones(10)) == pytest.approx(1.0)


def test_w1_uniform_against_exact_cdf():
    a = make_rng(1).random(100000)
    assert wasserstein1_1d(uniform_cdf, a) < 0.005


def test_w1_symmetric_and_triangle():
    r = make_rng(2)
    a, b, c = r.random(500), r.beta(2, 5, 700), r.beta(5, 2, 300)
    assert wasserstein1_1d(a, b) == pytest.approx(wasserstein1_1d(b, a), abs=1e-12)
    assert wasserstein1_1d(a, c) <= wasserstein1_1d(a, b) + wasserstein1_1d(b, c) + 1e-12


def test_w1_empty_input():
    with pytest.raises(ValueError):
        wasserstein1_1d(np.array([]), np.array([0.5]))
    with pytest.raises(ValueError):
        wasserstein1_1d(uniform_cdf, np.array([]))


# --- sliced W1 ---

def test_sliced_w1_identical_clouds():
    a = make_rng(3).random((400, 2))
    assert sliced_w1(a, a, rng=make_rng(4)) == 0.0


def test_sliced_w1_translation():
    """A shift delta gives E|<delta, u>| = 2|delta|/pi for uniform directions in 2D."""
    a = make_rng(5).random((2000, 2)) * 0.5
    delta = np.array([0.2, 0.0])
    got = sliced_w1(a, a + delta, n_directions=2000, rng=make_rng(6))
    assert got == pytest.approx(2 * 0.2 / np.pi, rel=0.1)


def test_sliced_w1_deterministic_for_seed():
    r = make_rng(7)
    a, b = r.random((100, 3)), r.random((100, 3))
    assert sliced_w1(a, b, 1, make_rng(8)) == sliced_w1(a, b, 1, make_rng(8))


def test_sliced_w1_dimension_mismatch():
    with pytest.raises(ValueError):
        sliced_w1(np.zeros((5, 2)), np.zeros((5, 3)))


# --- KS ---

def test_ks_samples_from_cdf():
    assert ks_statistic_1d(make_rng(9).random(100000), uniform_cdf) < 0.006


def test_ks_all_zero_samples():
    assert ks_statistic_1d(np.zeros(50), uniform_cdf) == pytest.approx(1.0)


def test_ks_single_sample_at_median():
    assert ks_statistic_1d(np.array([0.5]), uniform_cdf) == pytest.approx(0.5)


# --- sample sets and convergence ---

def test_sample_set_rejects_points_outside():
    SampleSet(np.array([[0.2, 0.3]]), Domain.simplex(2))
    with pytest.raises(ValueError):
        SampleSet(np.array([[0.8, 0.3]]), Domain.simplex(2))


def test_nonincreasing_within_noise():
    assert is_nonincreasing_within([0.1, 0.05, 0.055, 0.03])
    assert not is_nonincreasing_within([0.1, 0.05, 0.08])
    assert is_nonincreasing_within([0.01, 0.012], rel_noise=0.0, abs_floor=0.005)


def test_self_convergence_rows():
    reference = make_rng(10).random(5000)

    def sample_fn(steps):
        return np.clip(make_rng(11, steps).random(5000) + 1.0 / steps, 0.0, 1.0)

    rows = self_convergence(sample_fn, [10, 100, 1000], reference)
    assert [r[0] for r in rows] == [10, 100, 1000]
    assert rows[0][1] > rows[-1][1]
