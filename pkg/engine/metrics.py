"""Distribution distances and convergence harnesses."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from config.settings import METRIC_DEFAULTS
from engine.geometry import contains

logger = logging.getLogger(__name__)


@dataclass
class SampleSet:
    points: np.ndarray
    domain: object
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, self.domain.dim)
        if not contains(self.points, self.domain, tol=1e-12):
            raise ValueError(f'sample set has points outside {self.domain}')

    @property
    def dim(self):
        return self.domain.dim


def _samples(a, name):
    a = np.asarray(a, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValueError(f'{name} is empty')
    return a


def wasserstein1_1d(a, b, n_nodes=METRIC_DEFAULTS['cdf_nodes']):
    """W1 between samples `b` and either samples or a callable CDF `a` on [0, 1].

    Two sample sets use the exact order-statistics formula; against a CDF the
    integral of |F_n - F| is taken on an n_nodes grid.
    """
    b = _samples(b, 'b')
    if callable(a):
        grid = np.linspace(0.0, 1.0, int(n_nodes))
        emp = np.searchsorted(np.sort(b), grid, side='right') / b.size
        return float(trapezoid(np.abs(emp - a(grid)), grid))
    return float(stats.wasserstein_distance(_samples(a, 'a'), b))


def _points(s):
    if isinstance(s, SampleSet):
        return s.points
    s = np.asarray(s, dtype=np.float64)
    return s[:, None] if s.ndim == 1 else s


def sliced_w1(a, b, n_directions=METRIC_DEFAULTS['n_directions'], rng=None):
    """Mean 1D W1 of projections on random unit directions."""
    a = _points(a)
    b = _points(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f'dimension mismatch: {a.shape[1]} vs {b.shape[1]}')
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError('sample sets must be nonempty')
    rng = rng if rng is not None else np.random.default_rng(0)
    u = rng.standard_normal((int(n_directions), a.shape[1]))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return float(np.mean([stats.wasserstein_distance(a @ d, b @ d) for d in u]))


def ks_statistic_1d(samples, cdf):
    """Kolmogorov-Smirnov sup gap between samples and a CDF."""
    samples = _samples(samples, 'samples')
    return float(stats.kstest(samples, cdf).statistic)


def is_nonincreasing_within(values, rel_noise=0.2, abs_floor=0.0):
    """True if each value is at most (1 + rel_noise) * previous + abs_floor."""
    values = list(values)
    return all(b <= (1.0 + rel_noise) * a + abs_floor for a, b in zip(values, values[1:]))


def self_convergence(sample_fn, ladder, reference):
    """[(steps, W1(sample_fn(steps), reference))] along a step ladder (1D)."""
    rows = []
    for steps in ladder:
        w1 = wasserstein1_1d(reference, sample_fn(steps))
        logger.info('convergence: steps=%d W1=%.5f', steps, w1)
        rows.append((int(steps), w1))
    return rows
