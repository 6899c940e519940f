"""Likelihood upper bound and bits-per-dimension.

For data x on the cube, with v_min = v(0, t_min) and v_1 = v(0, 1):

  -log p(x) <= prior + score + reconstruction

  prior          KL(K(x, .; v_1) || U)           = -H(v_1)
  score          1/2 int gbar^2 E|s - grad log K|^2 dt
  reconstruction E[-log K(x_hat -> x; v_min)]    =  H(v_min)

The score term splits into a model part, 1/2 int gbar^2 E[|s|^2 - 2 <s, grad log K>],
estimated by stratified Monte Carlo, plus 1/2 int gbar^2 E|grad log K|^2 dt,
which the heat-flow identity dH/dv = J/2 turns into H(v_1) - H(v_min).
Entropies H are per dimension and computed by Gauss-Legendre quadrature.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from config.settings import ELBO_DEFAULTS, THREADS
from engine.errors import DensityUnderflowError
from engine.kernel import DEFAULT_KERNEL, log_density_and_score_1d, sample_transition_nd, transition_score_nd
from engine.rng import make_rng

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ElboReport:
    score_term: float
    prior_term: float
    reconstruction_term: float
    total_nats: float
    bpd: float
    mc_std_error: float


def bpd(total_nats, dim, logdet_correction=0.0):
    """(total_nats - logdet_correction) / (dim ln 2).

    Accepts an ElboReport or a plain nats value. For simplex data pass the
    log-Jacobian of the simplex -> cube map, i.e. -stick_break_logdet(x).
    """
    if dim < 1:
        raise ValueError('dim must be >= 1')
    nats = total_nats.total_nats if isinstance(total_nats, ElboReport) else float(total_nats)
    return (nats - logdet_correction) / (dim * LN2)


def _window(x, v, lo_cut=12.0):
    s = math.sqrt(v)
    return max(0.0, x - lo_cut * s), min(1.0, x + lo_cut * s)


def _kernel_on_window(x, v, n_nodes, lo, hi, kernel):
    nodes, weights = np.polynomial.legendre.leggauss(int(n_nodes))
    half = 0.5 * (hi - lo)
    ys = lo + half * (nodes + 1.0)
    logk, score = log_density_and_score_1d(x, ys, v, kernel)
    return half * weights, logk, score


def kernel_entropy_1d(x, v, n_nodes=ELBO_DEFAULTS['entropy_nodes'], kernel=DEFAULT_KERNEL):
    """Differential entropy of K(x, .; v) on [0, 1]."""
    w, logk, _ = _kernel_on_window(x, v, n_nodes, *_window(x, v), kernel)
    return float(-(w * np.exp(logk) * logk).sum())


def kernel_fisher_information_1d(x, v, n_nodes=ELBO_DEFAULTS['entropy_nodes'], kernel=DEFAULT_KERNEL):
    """int K(x, y; v) (d/dy log K)^2 dy."""
    w, logk, score = _kernel_on_window(x, v, n_nodes, *_window(x, v), kernel)
    return float((w * np.exp(logk) * score * score).sum())


def prior_kl_1d(x, v1, n_nodes=ELBO_DEFAULTS['prior_nodes'], kernel=DEFAULT_KERNEL):
    """KL(K(x, .; v1) || U[0, 1]) by fixed-order quadrature on [0, 1]."""
    w, logk, _ = _kernel_on_window(x, v1, n_nodes, 0.0, 1.0, kernel)
    return float((w * np.exp(logk) * logk).sum())


def elbo_pointwise(x, score, schedule, n_mc=ELBO_DEFAULTS['n_mc'], rng=None,
                   kernel=DEFAULT_KERNEL, logdet_correction=0.0,
                   prior_nodes=ELBO_DEFAULTS['prior_nodes'],
                   entropy_nodes=ELBO_DEFAULTS['entropy_nodes']):
    """Upper bound on -log p(x) for one cube point, in nats."""
    if n_mc < ELBO_DEFAULTS['min_mc']:
        raise ValueError(f"n_mc must be >= {ELBO_DEFAULTS['min_mc']}, got {n_mc}")
    rng = rng if rng is not None else make_rng(0)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    d = x.shape[0]

    # one t per stratum
    t = schedule.t_min + (1.0 - schedule.t_min) * (np.arange(n_mc) + rng.random(n_mc)) / n_mc
    v = np.asarray(schedule.accumulated_variance(0.0, t))
    x_t = sample_transition_nd(np.broadcast_to(x, (n_mc, d)), v, rng)
    try:
        target = transition_score_nd(np.broadcast_to(x, (n_mc, d)), x_t, v, kernel)
    except DensityUnderflowError as exc:
        logger.error('ELBO target underflow for x=%s (t in [%.3g, %.3g])', x.tolist(), t.min(), t.max())
        exc.context.setdefault('t_min_stratum', float(t.min()))
        raise
    s = np.asarray(score(x_t, t)).reshape(n_mc, d)
    integrand = np.asarray(schedule.gbar(t)) ** 2 * (s * s - 2.0 * s * target).sum(axis=1)
    scale = 0.5 * (1.0 - schedule.t_min)
    model_part = scale * float(integrand.mean())
    std_error = scale * float(integrand.std(ddof=1)) / math.sqrt(n_mc)

    v_min = schedule.accumulated_variance(0.0, schedule.t_min)
    v_1 = schedule.accumulated_variance(0.0, 1.0)
    h_min = sum(kernel_entropy_1d(xi, v_min, entropy_nodes, kernel) for xi in x)
    h_1 = sum(kernel_entropy_1d(xi, v_1, entropy_nodes, kernel) for xi in x)
    prior = sum(prior_kl_1d(xi, v_1, prior_nodes, kernel) for xi in x)

    score_term = model_part + (h_1 - h_min)
    reconstruction = h_min
    total = score_term + prior + reconstruction
    return ElboReport(
        score_term=score_term,
        prior_term=prior,
        reconstruction_term=reconstruction,
        total_nats=total,
        bpd=bpd(total, d, logdet_correction),
        mc_std_error=std_error,
    )


def elbo_dataset(points, score, schedule, n_mc=ELBO_DEFAULTS['n_mc'], seed=0,
                 kernel=DEFAULT_KERNEL, logdet_corrections=None, threads=None):
    """elbo_pointwise over rows of `points`; point i uses stream (seed, i).

    Results come back in input order whatever the thread count.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    corrections = np.zeros(len(points)) if logdet_corrections is None else np.asarray(logdet_corrections)
    threads = threads or THREADS

    def one(i):
        return elbo_pointwise(points[i], score, schedule, n_mc, make_rng(seed, i), kernel,
                              logdet_correction=float(corrections[i]))

    if threads <= 1:
        return [one(i) for i in range(len(points))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(len(points))))


def summarize(reports):
    """Mean bpd / nats with standard errors of the mean."""
    n = len(reports)
    if n == 0:
        raise ValueError('no reports to summarize')
    bpds = np.array([r.bpd for r in reports])
    nats = np.array([r.total_nats for r in reports])
    spread = (lambda a: float(a.std(ddof=1) / math.sqrt(n))) if n > 1 else (lambda a: float('nan'))
    return {
        'n_points': n,
        'mean_total_nats': float(nats.mean()),
        'stderr_total_nats': spread(nats),
        'mean_bpd': float(bpds.mean()),
        'stderr_bpd': spread(bpds),
    }
