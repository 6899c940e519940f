"""Reflected Brownian transition kernel on [0, 1] and its product extension.

Two equal series for the density of y given x after variance v:

  image sum:  sum_{m=-M..M} phi_v(2m + y - x) + phi_v(2m - y - x)
  eigen sum:  1 + 2 sum_{k=1..K} exp(-k^2 pi^2 v / 2) cos(k pi x) cos(k pi y)

The image sum converges fast for small v, the eigen sum for large v; the
kernel switches at sqrt(v) = crossover_sigma. Scores are d/dy log p and
come from the analytic derivative of the selected branch. The image branch
is evaluated in the log domain.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from config.settings import KERNEL_DEFAULTS
from engine.errors import DensityUnderflowError

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ReflectedKernel:
    crossover_sigma: float = KERNEL_DEFAULTS['crossover_sigma']
    n_image_terms: int = KERNEL_DEFAULTS['n_image_terms']
    n_eigen_terms: int = KERNEL_DEFAULTS['n_eigen_terms']
    underflow_floor: float = KERNEL_DEFAULTS['underflow_floor']

    def __post_init__(self):
        if self.crossover_sigma <= 0:
            raise ValueError('crossover_sigma must be > 0')
        if self.n_image_terms < 1 or self.n_eigen_terms < 1:
            raise ValueError('truncation orders must be positive')


DEFAULT_KERNEL = ReflectedKernel()


def _check_variance(v):
    v = np.asarray(v, dtype=np.float64)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError('variance v must be finite and > 0')
    return v


def _as_output(a):
    return float(a) if np.ndim(a) == 0 else a


# --- image branch ---

def _image_logits(x, y, v, M):
    shifts = 2.0 * np.arange(-M, M + 1)
    a = shifts + (y - x)[..., None]
    b = shifts - (y + x)[..., None]
    vv = v[..., None]
    return a, b, -a * a / (2.0 * vv), -b * b / (2.0 * vv)


def _image_log_density(x, y, v, M):
    _, _, la, lb = _image_logits(x, y, v, M)
    return logsumexp(np.concatenate([la, lb], axis=-1), axis=-1) - 0.5 * (LOG_2PI + np.log(v))


def _image_score(x, y, v, M):
    a, b, la, lb = _image_logits(x, y, v, M)
    n = la.shape[-1]
    w = softmax(np.concatenate([la, lb], axis=-1), axis=-1)
    wa, wb = w[..., :n], w[..., n:]
    vv = v[..., None]
    # paired so that the mirrored terms cancel exactly at y = 0
    return (wa * (-a / vv) + wb * (b / vv)).sum(axis=-1)


def gaussian_image_sum(x, y, v, M=KERNEL_DEFAULTS['n_image_terms']):
    """Method-of-images density with 2M+1 image pairs."""
    v = _check_variance(v)
    x, y, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), v)
    return _as_output(np.exp(_image_log_density(x, y, v, int(M))))


# --- eigen branch ---

def _eigen_parts(x, y, v, K):
    k = np.arange(1, K + 1, dtype=np.float64)
    decay = np.exp(-(k * k) * (np.pi ** 2) * v[..., None] / 2.0)
    cx = np.cos(k * np.pi * x[..., None])
    cy = np.cos(k * np.pi * y[..., None])
    # sin through the nearer boundary so it is exactly 0 at y = 0 and y = 1
    yy = y[..., None]
    sign = np.where(k % 2 == 1, 1.0, -1.0)
    sy = np.where(yy <= 0.5, np.sin(k * np.pi * yy), sign * np.sin(k * np.pi * (1.0 - yy)))
    density = 1.0 + 2.0 * (decay * cx * cy).sum(axis=-1)
    d_density = -2.0 * (decay * cx * k * np.pi * sy).sum(axis=-1)
    return density, d_density


def eigen_sum(x, y, v, K=KERNEL_DEFAULTS['n_eigen_terms']):
    """Neumann eigenfunction expansion truncated at K modes."""
    v = _check_variance(v)
    x, y, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), v)
    density, _ = _eigen_parts(x, y, v, int(K))
    return _as_output(density)


# --- branch selection ---

def _evaluate(x, y, v, kernel, want_score):
    v = _check_variance(v)
    x, y, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), v)
    shape = x.shape
    x, y, v = x.ravel(), y.ravel(), v.ravel()
    logp = np.empty(x.shape)
    score = np.empty(x.shape) if want_score else None
    image = np.sqrt(v) < kernel.crossover_sigma
    if np.any(image):
        xi, yi, vi = x[image], y[image], v[image]
        logp[image] = _image_log_density(xi, yi, vi, kernel.n_image_terms)
        if want_score:
            score[image] = _image_score(xi, yi, vi, kernel.n_image_terms)
    eig = ~image
    if np.any(eig):
        dens, d_dens = _eigen_parts(x[eig], y[eig], v[eig], kernel.n_eigen_terms)
        with np.errstate(divide='ignore', invalid='ignore'):
            logp[eig] = np.log(dens)
            if want_score:
                score[eig] = d_dens / dens
    return logp.reshape(shape), (score.reshape(shape) if want_score else None)


def _check_underflow(logp, x, y, v, kernel):
    floor = np.log(kernel.underflow_floor)
    low = ~(logp >= floor)
    if np.any(low):
        idx = tuple(np.argwhere(low)[0]) if np.ndim(logp) else ()
        ctx = {
            'x': float(np.broadcast_to(x, logp.shape)[idx]),
            'y': float(np.broadcast_to(y, logp.shape)[idx]),
            'v': float(np.broadcast_to(v, logp.shape)[idx]),
        }
        logger.warning('transition density below %.0e at %s', kernel.underflow_floor, ctx)
        raise DensityUnderflowError(
            f'transition density below {kernel.underflow_floor:g} at {ctx}', context=ctx)


def log_transition_density_1d(x, y, v, kernel=DEFAULT_KERNEL):
    """log p(y | x; v); never underflows."""
    logp, _ = _evaluate(x, y, v, kernel, want_score=False)
    return _as_output(logp)


def transition_density_1d(x, y, v, kernel=DEFAULT_KERNEL):
    """p(y | x; v) with crossover branching.

    Raises DensityUnderflowError where the density is below the floor.
    """
    logp, _ = _evaluate(x, y, v, kernel, want_score=False)
    _check_underflow(logp, x, y, v, kernel)
    return _as_output(np.exp(logp))


def transition_score_1d(x, y, v, kernel=DEFAULT_KERNEL):
    """d/dy log p(y | x; v)."""
    logp, score = _evaluate(x, y, v, kernel, want_score=True)
    _check_underflow(logp, x, y, v, kernel)
    return _as_output(score)


def log_density_and_score_1d(x, y, v, kernel=DEFAULT_KERNEL):
    """Unchecked (log p, score) pair; callers doing mixtures handle underflow."""
    logp, score = _evaluate(x, y, v, kernel, want_score=True)
    return logp, score


def sample_transition_1d(x, v, rng):
    """Draw y ~ p(. | x; v) by folding a Gaussian."""
    v = _check_variance(v)
    x = np.asarray(x, dtype=np.float64)
    z = x + np.sqrt(v) * rng.standard_normal(np.broadcast_shapes(x.shape, v.shape))
    r = np.mod(z, 2.0)
    return _as_output(np.where(r <= 1.0, r, 2.0 - r))


# --- product kernel on the cube ---

def _nd_args(x, y, v):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1:] != y.shape[-1:]:
        raise ValueError(f'dimension mismatch: {x.shape[-1:]} vs {y.shape[-1:]}')
    v = np.asarray(v, dtype=np.float64)
    return x, y, v[..., None] if v.ndim else v


def log_transition_density_nd(x, y, v, kernel=DEFAULT_KERNEL):
    x, y, v = _nd_args(x, y, v)
    logp, _ = _evaluate(x, y, v, kernel, want_score=False)
    return _as_output(logp.sum(axis=-1))


def _check_underflow_nd(logp, x, y, v, kernel):
    """Like _check_underflow, with whole points as context."""
    floor = np.log(kernel.underflow_floor)
    low = ~(logp >= floor)
    if np.any(low):
        idx = tuple(np.argwhere(low)[0]) if np.ndim(logp) else ()
        shape = np.broadcast_shapes(x.shape, y.shape, np.shape(v))
        ctx = {
            'x': np.broadcast_to(x, shape)[idx].tolist(),
            'y': np.broadcast_to(y, shape)[idx].tolist(),
            'v': float(np.broadcast_to(v, shape)[idx].flat[0]),
        }
        logger.warning('transition density below %.0e at %s', kernel.underflow_floor, ctx)
        raise DensityUnderflowError(
            f'transition density below {kernel.underflow_floor:g} at {ctx}', context=ctx)


def transition_density_nd(x, y, v, kernel=DEFAULT_KERNEL):
    """Product of 1D densities; cost linear in d."""
    logp = np.asarray(log_transition_density_nd(x, y, v, kernel))
    x, y, v = _nd_args(x, y, v)
    _check_underflow_nd(logp, x, y, v, kernel)
    return _as_output(np.exp(logp))


def transition_score_nd(x, y, v, kernel=DEFAULT_KERNEL):
    """Componentwise 1D scores."""
    x, y, v = _nd_args(x, y, v)
    logp, score = _evaluate(x, y, v, kernel, want_score=True)
    _check_underflow(logp, x, y, v, kernel)
    return score


def sample_transition_nd(x, v, rng):
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return sample_transition_1d(x, v[..., None] if v.ndim else v, rng)


# --- truncation diagnostics ---

def truncation_error(x, y, v, kernel=DEFAULT_KERNEL, factor=4):
    """|selected branch at (M, K) - same branch at (factor*M, factor*K)|."""
    fine = ReflectedKernel(kernel.crossover_sigma, factor * kernel.n_image_terms,
                           factor * kernel.n_eigen_terms, kernel.underflow_floor)
    coarse_logp, _ = _evaluate(x, y, v, kernel, want_score=False)
    fine_logp, _ = _evaluate(x, y, v, fine, want_score=False)
    return _as_output(np.abs(np.exp(coarse_logp) - np.exp(fine_logp)))


# --- posterior means on [0, 1] ---

def _legendre_unit(n_nodes, lo=0.0, hi=1.0):
    nodes, weights = np.polynomial.legendre.leggauss(int(n_nodes))
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


def _posterior_weights(y, v, prior, n_nodes, kernel):
    xs, ws = _legendre_unit(n_nodes)
    logk, score = log_density_and_score_1d(xs, y, v, kernel)
    p = np.asarray(prior(xs), dtype=np.float64)
    shift = logk.max()
    w = ws * np.exp(logk - shift) * p
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        raise DensityUnderflowError(f'vanishing marginal p_Y({y}) under the prior',
                                    context={'y': float(y), 'v': float(v)})
    return xs, w / total, score


def posterior_mean_1d(y, v, prior, n_nodes=1024, kernel=DEFAULT_KERNEL):
    """E[x | y] under prior(x) and the reflected kernel, by Gauss-Legendre quadrature."""
    xs, w, _ = _posterior_weights(y, v, prior, n_nodes, kernel)
    return float((w * xs).sum())


def tweedie_mean_1d(y, v, prior, n_nodes=1024, kernel=DEFAULT_KERNEL):
    """y + v * d/dy log p_Y(y), with the marginal score from the same quadrature."""
    _, w, score = _posterior_weights(y, v, prior, n_nodes, kernel)
    return float(y + v * (w * score).sum())


def _gaussian_posterior_weights(y, v, prior, lo, hi, n_nodes):
    xs, ws = _legendre_unit(n_nodes, lo, hi)
    logk = -(y - xs) ** 2 / (2.0 * v)
    w = ws * np.exp(logk - logk.max()) * np.asarray(prior(xs), dtype=np.float64)
    total = w.sum()
    if not total > 0:
        raise DensityUnderflowError(f'vanishing marginal p_Y({y}) under the prior',
                                    context={'y': float(y), 'v': float(v)})
    return xs, w / total


def posterior_mean_gaussian(y, v, prior, lo=0.0, hi=1.0, n_nodes=1024):
    """Unbounded-domain control: plain Gaussian likelihood."""
    xs, w = _gaussian_posterior_weights(y, v, prior, lo, hi, n_nodes)
    return float((w * xs).sum())


def tweedie_mean_gaussian(y, v, prior, lo=0.0, hi=1.0, n_nodes=1024):
    xs, w = _gaussian_posterior_weights(y, v, prior, lo, hi, n_nodes)
    return float(y + v * (w * (-(y - xs) / v)).sum())
