"""Score functions and closed-form toy targets.

A score function maps (x, t) -> grad_x log p_t(x) for a batch x of shape
(n, d) and t either a scalar or an (n,) array. Toy targets are mixtures of
reflected kernels, so by the semigroup property

  p_t(x) = sum_i w_i * K(c_i, x; b_i + v(0, t))

and both p_t and its score are exact.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import logsumexp, softmax

from engine.errors import DensityUnderflowError, NonFiniteError
from engine.geometry import Domain
from engine.kernel import DEFAULT_KERNEL, log_density_and_score_1d
from engine.schedule import NoiseSchedule

logger = logging.getLogger(__name__)


class ScoreFunction:
    """Interface: score(x, t) -> array shaped like x."""

    dim = None

    def __call__(self, x, t):
        return self.evaluate(x, t)

    def evaluate(self, x, t):
        raise NotImplementedError


class ZeroScore(ScoreFunction):
    def __init__(self, dim=1):
        self.dim = dim

    def evaluate(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=np.float64))


class PerturbedScore(ScoreFunction):
    """base(x, t) + amplitude * sin(pi x); the perturbation keeps the Neumann condition."""

    def __init__(self, base, amplitude):
        self.base = base
        self.amplitude = float(amplitude)
        self.dim = base.dim

    def evaluate(self, x, t):
        x = np.asarray(x, dtype=np.float64)
        return self.base(x, t) + self.amplitude * np.sin(np.pi * x)


def _batch(x, dim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and dim == 1:
        x = x[:, None]
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[-1] != dim:
        raise ValueError(f'expected points of dimension {dim}, got {x.shape[-1]}')
    return x


def _times(t, n):
    t = np.asarray(t, dtype=np.float64)
    return np.broadcast_to(t, (n,)) if t.ndim == 0 else t


@dataclass(frozen=True)
class ToyDistribution:
    weights: tuple
    centers: tuple
    base_variances: tuple
    labels: tuple = None
    name: str = 'toy'

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError('mixture weights must be positive and sum to 1')
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != len(w):
            raise ValueError('centers must be one point per component')
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError('centers must lie in the unit cube')
        if np.any(np.asarray(self.base_variances) < 0):
            raise ValueError('base variances must be >= 0')
        if self.labels is not None and len(self.labels) != len(w):
            raise ValueError('one label per component')

    @property
    def dim(self):
        return len(self.centers[0])

    @property
    def domain(self):
        return Domain.interval() if self.dim == 1 else Domain.cube(self.dim)

    @property
    def classes(self):
        return sorted(set(self.labels)) if self.labels is not None else []

    def conditional(self, label):
        """Mixture restricted to the components carrying `label`."""
        if self.labels is None:
            raise ValueError(f'{self.name} has no class labels')
        keep = [i for i, lab in enumerate(self.labels) if lab == label]
        if not keep:
            raise ValueError(f'no components with label {label!r}')
        w = np.asarray(self.weights)[keep]
        return ToyDistribution(
            weights=tuple((w / w.sum()).tolist()),
            centers=tuple(self.centers[i] for i in keep),
            base_variances=tuple(self.base_variances[i] for i in keep),
            labels=tuple(label for _ in keep),
            name=f'{self.name}|{label}',
        )

    def sample(self, n, rng, t=0.0, schedule=None):
        """Exact draws from p_t."""
        schedule = schedule or NoiseSchedule()
        w = np.asarray(self.weights)
        comp = rng.choice(len(w), size=int(n), p=w)
        var = np.asarray(self.base_variances)[comp] + schedule.accumulated_variance(0.0, t)
        c = np.asarray(self.centers)[comp]
        z = c + np.sqrt(var)[:, None] * rng.standard_normal(c.shape)
        r = np.mod(z, 2.0)
        return np.where(r <= 1.0, r, 2.0 - r)


def _component_terms(toy, x, t, schedule, kernel):
    """Per-component log densities (n, k) and scores (n, k, d)."""
    n = x.shape[0]
    t = _times(t, n)
    v = np.asarray(schedule.accumulated_variance(0.0, t))
    var = np.asarray(toy.base_variances)[None, :] + v[:, None]
    if np.any(var <= 0):
        raise ValueError('toy density needs b_i + v(0, t) > 0; use t > 0 for point-mass components')
    centers = np.asarray(toy.centers, dtype=np.float64)
    logk, score = log_density_and_score_1d(centers[None, :, :], x[:, None, :], var[:, :, None], kernel)
    return np.log(np.asarray(toy.weights))[None, :] + logk.sum(axis=-1), score


def toy_log_density(toy, x, t, schedule=None, kernel=DEFAULT_KERNEL):
    """log p_t(x) for a batch."""
    schedule = schedule or NoiseSchedule()
    x = _batch(x, toy.dim)
    logw, _ = _component_terms(toy, x, t, schedule, kernel)
    return logsumexp(logw, axis=1)


def exact_score(toy, x, t, schedule=None, kernel=DEFAULT_KERNEL):
    """grad_x log p_t(x): responsibility-weighted component scores."""
    schedule = schedule or NoiseSchedule()
    x = _batch(x, toy.dim)
    logw, scores = _component_terms(toy, x, t, schedule, kernel)
    if np.any(logw.max(axis=1) < np.log(kernel.underflow_floor)):
        row = int(np.argmin(logw.max(axis=1)))
        raise DensityUnderflowError('toy mixture density underflow',
                                    context={'x': x[row].tolist(), 't': float(np.ravel(t)[0])})
    resp = softmax(logw, axis=1)
    return (resp[:, :, None] * scores).sum(axis=1)


def class_posterior(toy, label, x, t, schedule=None, kernel=DEFAULT_KERNEL):
    """Bayes posterior q_t(label | x) of the labelled mixture."""
    schedule = schedule or NoiseSchedule()
    x = _batch(x, toy.dim)
    logw, _ = _component_terms(toy, x, t, schedule, kernel)
    mask = np.asarray([lab == label for lab in toy.labels])
    return np.exp(logsumexp(logw[:, mask], axis=1) - logsumexp(logw, axis=1))


class ExactScore(ScoreFunction):
    """Closed-form score of a toy target."""

    def __init__(self, toy, schedule=None, kernel=DEFAULT_KERNEL):
        self.toy = toy
        self.schedule = schedule or NoiseSchedule()
        self.kernel = kernel
        self.dim = toy.dim

    def evaluate(self, x, t):
        out = exact_score(self.toy, x, t, self.schedule, self.kernel)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError('exact score produced non-finite values', context={'t': t})
        return out


def toy_cdf_1d(toy, t, schedule=None, n_nodes=10000, kernel=DEFAULT_KERNEL):
    """Quadrature CDF of a 1D toy at time t, returned as a callable."""
    if toy.dim != 1:
        raise ValueError('toy_cdf_1d needs a 1D toy')
    grid = np.linspace(0.0, 1.0, int(n_nodes))
    dens = np.exp(toy_log_density(toy, grid[:, None], t, schedule, kernel))
    return cdf_from_density(grid, dens)


def cdf_from_density(grid, density):
    """Normalized cumulative trapezoid; callable CDF via interpolation."""
    cum = cumulative_trapezoid(density, grid, initial=0.0)
    cum = cum / cum[-1]

    def cdf(x):
        return np.interp(x, grid, cum)

    return cdf


# --- named toy targets ---

def _uniform(dim=1):
    # base variance 100 makes each component uniform to ~e^-490
    return ToyDistribution((1.0,), ((0.5,) * dim,), (100.0,), name='uniform')


TOY_DATASETS = {
    '1d-two-bump': lambda dim=1: ToyDistribution(
        (0.4, 0.6), ((0.25,), (0.7,)), (0.06 ** 2, 0.08 ** 2), name='1d-two-bump'),
    '1d-boundary': lambda dim=1: ToyDistribution(
        (0.5, 0.5), ((0.03,), (0.6,)), (0.05 ** 2, 0.1 ** 2), name='1d-boundary'),
    '1d-two-class': lambda dim=1: ToyDistribution(
        (0.5, 0.5), ((0.25,), (0.75,)), (0.07 ** 2, 0.07 ** 2), labels=(0, 1), name='1d-two-class'),
    '2d-mixture': lambda dim=2: ToyDistribution(
        (0.3, 0.3, 0.4), ((0.25, 0.3), (0.7, 0.25), (0.5, 0.75)), (0.07 ** 2,) * 3, name='2d-mixture'),
    '2d-two-class': lambda dim=2: ToyDistribution(
        (0.5, 0.5), ((0.3, 0.3), (0.7, 0.7)), (0.08 ** 2, 0.08 ** 2), labels=(0, 1), name='2d-two-class'),
    'uniform': _uniform,
}


def get_toy(name, dim=None):
    if name not in TOY_DATASETS:
        raise ValueError(f'unknown toy dataset {name!r}; known: {sorted(TOY_DATASETS)}')
    toy = TOY_DATASETS[name](dim) if dim is not None else TOY_DATASETS[name]()
    if dim is not None and toy.dim != dim:
        raise ValueError(f'toy {name!r} has dimension {toy.dim}, not {dim}')
    return toy
