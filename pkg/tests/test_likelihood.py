"""Tests for engine/likelihood.py — ELBO terms, bits-per-dimension and dataset runs."""
import math

import numpy as np
import pytest

from engine.likelihood import (
    ElboReport, bpd, elbo_dataset, elbo_pointwise, kernel_entropy_1d, prior_kl_1d, summarize,
)
from engine.rng import make_rng
from engine.score import ExactScore, PerturbedScore, ZeroScore, get_toy, toy_log_density


def report(total, bpd_value):
    return ElboReport(score_term=0.0, prior_term=0.0, reconstruction_term=0.0,
                      total_nats=total, bpd=bpd_value, mc_std_error=0.0)


# --- bits per dimension ---

def test_bpd_formula():
    assert bpd(3 * math.log(2.0), 3) == pytest.approx(1.0)
    assert bpd(10.0, 2, logdet_correction=2.0) == pytest.approx(8.0 / (2 * math.log(2.0)))
    assert bpd(report(2 * math.log(2.0), 0.0), 1) == pytest.approx(2.0)


def test_bpd_rejects_zero_dimension():
    with pytest.raises(ValueError):
        bpd(1.0, 0)


# --- kernel terms ---

def test_prior_kl_vanishes_for_wide_kernel():
    assert prior_kl_1d(0.3, 25.0) == pytest.approx(0.0, abs=1e-6)


def test_small_variance_entropy_is_gaussian():
    v = 1e-6
    expected = 0.5 * math.log(2 * math.pi * math.e * v)
    assert kernel_entropy_1d(0.5, v) == pytest.approx(expected, abs=1e-6)


# --- pointwise bound ---

@pytest.mark.parametrize('dim', [1, 16])
def test_uniform_data_with_zero_score_costs_nothing(dim, schedule):
    """On uniform data the zero score is optimal and the bound is tight at 0 nats."""
    x = make_rng(dim).random(dim)
    out = elbo_pointwise(x, ZeroScore(dim), schedule, n_mc=16, rng=make_rng(0))
    assert abs(out.total_nats) < 2e-3
    assert out.score_term == pytest.approx(-out.prior_term - out.reconstruction_term, abs=2e-3)


def test_exact_score_bound_holds(schedule):
    """Mean bound over toy points is at least the exact negative log-likelihood."""
    toy = get_toy('1d-two-bump')
    points = toy.sample(20, make_rng(1))
    reports = elbo_dataset(points, ExactScore(toy, schedule), schedule, n_mc=64, seed=2, threads=1)
    nll = -toy_log_density(toy, points, 0.0, schedule)
    mean_total = np.mean([r.total_nats for r in reports])
    mc_error = math.sqrt(sum(r.mc_std_error ** 2 for r in reports)) / len(reports)
    assert mean_total >= float(nll.mean()) - 3 * mc_error - 1e-3


def test_exact_score_beats_perturbed_score(schedule):
    """A score error can only loosen the bound."""
    toy = get_toy('1d-two-bump')
    points = toy.sample(20, make_rng(6))
    exact = ExactScore(toy, schedule)
    exact_reports = elbo_dataset(points, exact, schedule, n_mc=32, seed=7, threads=1)
    perturbed_reports = elbo_dataset(points, PerturbedScore(exact, 1.0), schedule, n_mc=32, seed=7, threads=1)
    assert summarize(exact_reports)['mean_total_nats'] < summarize(perturbed_reports)['mean_total_nats']


def test_too_few_monte_carlo_samples(schedule):
    with pytest.raises(ValueError):
        elbo_pointwise(np.array([0.5]), ZeroScore(1), schedule, n_mc=8)


def test_logdet_correction_shifts_bpd_only(schedule):
    x = np.array([0.4, 0.6])
    plain = elbo_pointwise(x, ZeroScore(2), schedule, n_mc=16, rng=make_rng(3))
    shifted = elbo_pointwise(x, ZeroScore(2), schedule, n_mc=16, rng=make_rng(3), logdet_correction=1.0)
    assert shifted.total_nats == plain.total_nats
    assert shifted.bpd == pytest.approx(plain.bpd - 1.0 / (2 * math.log(2.0)))


# --- datasets ---

def test_dataset_order_independent_of_threads(schedule):
    toy = get_toy('1d-two-bump')
    points = toy.sample(6, make_rng(4))
    score = ExactScore(toy, schedule)
    serial = elbo_dataset(points, score, schedule, n_mc=16, seed=5, threads=1)
    pooled = elbo_dataset(points, score, schedule, n_mc=16, seed=5, threads=3)
    assert [r.total_nats for r in serial] == [r.total_nats for r in pooled]


def test_summarize():
    out = summarize([report(1.0, 2.0), report(3.0, 4.0)])
    assert out['n_points'] == 2
    assert out['mean_total_nats'] == pytest.approx(2.0)
    assert out['stderr_total_nats'] == pytest.approx(1.0)
    assert out['mean_bpd'] == pytest.approx(3.0)
    single = summarize([report(1.0, 2.0)])
    assert math.isnan(single['stderr_bpd'])
    with pytest.raises(ValueError):
        summarize([])
