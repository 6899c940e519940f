"""RVE SDE noise schedule.

  sigma(t)  = sigma0^(1-t) * sigma1^t
  gbar(t)   = sigma(t) * sqrt(2 log(sigma1 / sigma0))
  v(s, t)   = sigma(t)^2 - sigma(s)^2    (kernel variance between s and t)
"""
import math
from dataclasses import dataclass

import numpy as np

from config.settings import SCHEDULE_DEFAULTS, LIKELIHOOD_SCHEDULE


def _check_time(t, name='t'):
    t = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f'{name} must lie in [0, 1]')
    return t


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


@dataclass(frozen=True)
class NoiseSchedule:
    sigma0: float = SCHEDULE_DEFAULTS['sigma0']
    sigma1: float = SCHEDULE_DEFAULTS['sigma1']
    t_min: float = SCHEDULE_DEFAULTS['t_min']

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError('sigma0 must be > 0')
        if not self.sigma1 > self.sigma0:
            raise ValueError(f'sigma1 ({self.sigma1}) must exceed sigma0 ({self.sigma0})')
        if not 0.0 <= self.t_min < 1.0:
            raise ValueError('t_min must lie in [0, 1)')

    @classmethod
    def for_likelihood(cls):
        return cls(**LIKELIHOOD_SCHEDULE)

    @property
    def log_ratio(self):
        return math.log(self.sigma1 / self.sigma0)

    def sigma(self, t):
        t = _check_time(t)
        return _out(self.sigma0 ** (1.0 - t) * self.sigma1 ** t)

    def gbar(self, t):
        return _out(np.asarray(self.sigma(t)) * math.sqrt(2.0 * self.log_ratio))

    def accumulated_variance(self, s, t):
        s = _check_time(s, 's')
        t = _check_time(t)
        if np.any(s > t):
            raise ValueError('accumulated_variance needs s <= t')
        return _out(np.asarray(self.sigma(t)) ** 2 - np.asarray(self.sigma(s)) ** 2)

    def noise_std(self, t):
        """sqrt(v(0, t)); the perturbation scale seen by a data point."""
        return _out(np.sqrt(np.asarray(self.accumulated_variance(0.0, t))))

    def as_dict(self):
        return {'sigma0': self.sigma0, 'sigma1': self.sigma1, 't_min': self.t_min}
