"""Forward simulation and reverse-time generators for the RVE SDE.

Reverse samplers start from x_1 ~ U(domain) and walk the uniform grid
linspace(1, t_min, steps + 1). Every method is registered by name and
dispatched from SamplerConfig.method through run_sampler.

  reflect-em         x <- fold(x + g^2 s dt + g sqrt(dt) z)
  project-em         x <- proj(x + g^2 s dt + g sqrt(dt) z)
  pc                 reflected Langevin corrector, then reflect-em
  ode                dx/dt = -g^2 s / 2, RK4 or adaptive RK45
  annealed           x <- fold(x + (g^2 + gh^2)/2 s dt + gh sqrt(dt) z), gh = lambda g
  threshold-static   x <- proj(x + g^2 s dt) + g sqrt(dt) z
  threshold-dynamic  percentile-rescaled clamp in place of proj
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from config.settings import SAMPLER_DEFAULTS
from engine.errors import NonFiniteError, StepSizeUnderflowError
from engine.geometry import Domain, fold_point, project, stick_break, stick_break_inv, uniform_sample
from engine.kernel import sample_transition_nd
from engine.schedule import NoiseSchedule

logger = logging.getLogger(__name__)

_SAMPLERS = {}


def register_sampler(name):
    """Decorator registering a reverse sampler under `name`."""

    def _register(fn):
        if name in _SAMPLERS:
            raise ValueError(f'Already registered sampler with name: {name}')
        _SAMPLERS[name] = fn
        return fn

    return _register


def get_sampler(name):
    if name not in _SAMPLERS:
        raise ValueError(f'unknown sampler method {name!r}; known: {sorted(_SAMPLERS)}')
    return _SAMPLERS[name]


def sampler_names():
    return sorted(_SAMPLERS)


@dataclass(frozen=True)
class SamplerConfig:
    method: str = SAMPLER_DEFAULTS['method']
    steps: int = SAMPLER_DEFAULTS['steps']
    snr: float = SAMPLER_DEFAULTS['snr']
    gbar_scale: float = SAMPLER_DEFAULTS['gbar_scale']
    percentile: float = SAMPLER_DEFAULTS['percentile']
    eps_max: float = SAMPLER_DEFAULTS['eps_max']
    ode_solver: str = SAMPLER_DEFAULTS['ode_solver']
    atol: float = SAMPLER_DEFAULTS['atol']
    rtol: float = SAMPLER_DEFAULTS['rtol']
    n_samples: int = SAMPLER_DEFAULTS['n_samples']
    seed: int = 0

    def __post_init__(self):
        if int(self.steps) < 1:
            raise ValueError('steps must be >= 1')
        if self.snr < 0:
            raise ValueError('snr must be >= 0')
        if self.gbar_scale < 0:
            raise ValueError('gbar_scale must be >= 0')
        if not 0.0 < self.percentile <= 1.0:
            raise ValueError(f'percentile must lie in (0, 1], got {self.percentile}')
        if self.ode_solver not in ('rk4', 'rk45'):
            raise ValueError(f'unknown ode_solver {self.ode_solver!r}')
        if int(self.n_samples) < 1:
            raise ValueError('n_samples must be >= 1')


@dataclass
class SampleResult:
    x: np.ndarray
    method: str
    steps: int
    seed: int
    diagnostics: dict = field(default_factory=dict)


@dataclass
class OdeResult:
    x: np.ndarray
    times: np.ndarray
    trajectory: list = None
    exits: int = 0
    nfev: int = 0


def time_grid(steps, schedule):
    return np.linspace(1.0, schedule.t_min, int(steps) + 1)


def _default_domain(score, domain):
    if domain is not None:
        if domain.is_simplex:
            raise ValueError('reverse samplers run on the cube; map simplex data with stick_break_inv')
        return domain
    return Domain.interval() if score.dim == 1 else Domain.cube(score.dim)


def _evaluate_score(score, x, t, step=None):
    s = score(x, t)
    if not np.all(np.isfinite(s)):
        row = int(np.argwhere(~np.isfinite(s))[0][0])
        ctx = {'step': step, 't': float(t), 'point': x[row].tolist()}
        logger.error('non-finite score at %s', ctx)
        raise NonFiniteError(f'non-finite score at step {step}, t={t:.6g}', context=ctx)
    return s


def _initial(score, config, rng, domain, x_init):
    if x_init is not None:
        return np.array(x_init, dtype=np.float64, copy=True).reshape(-1, domain.dim)
    return uniform_sample(domain, rng, config.n_samples).reshape(-1, domain.dim)


# --- forward process ---

def forward_sample(x0, t, schedule, rng, domain=None):
    """Exact draw of x_t given x_0; the simplex goes through the cube."""
    if not 0.0 < t <= 1.0:
        raise ValueError('forward_sample needs t in (0, 1]')
    v = schedule.accumulated_variance(0.0, t)
    x0 = np.asarray(x0, dtype=np.float64)
    if domain is not None and domain.is_simplex:
        return stick_break(sample_transition_nd(stick_break_inv(x0), v, rng))
    return sample_transition_nd(x0, v, rng)


def forward_em_reflect(x0, t, schedule, rng, steps=10000):
    """Forward reflected Euler-Maruyama on [0, t]."""
    x = np.array(x0, dtype=np.float64, copy=True)
    ts = np.linspace(0.0, t, int(steps) + 1)
    for i in range(int(steps)):
        dt = ts[i + 1] - ts[i]
        x = fold_point(x + schedule.gbar(ts[i]) * np.sqrt(dt) * rng.standard_normal(x.shape),
                       Domain.cube(x.shape[-1]))
    return x


# --- reverse samplers ---

def langevin_corrector(x, t, score, snr, rng, eps_max=SAMPLER_DEFAULTS['eps_max'],
                       domain=None, diagnostics=None, step=None):
    """One reflected Langevin step at time t.

    eps = 2 (snr * mean|z| / mean|s|)^2, capped at eps_max; the update is
    fold(x + eps s + sqrt(2 eps) z). Returns (x', eps).
    """
    if snr == 0:
        return x, 0.0
    domain = _default_domain(score, domain)
    s = _evaluate_score(score, x, t, step=step)
    z = rng.standard_normal(x.shape)
    grad_norm = np.linalg.norm(s.reshape(s.shape[0], -1), axis=-1).mean()
    noise_norm = np.linalg.norm(z.reshape(z.shape[0], -1), axis=-1).mean()
    if grad_norm > 0:
        eps = 2.0 * (snr * noise_norm / grad_norm) ** 2
    else:
        eps = np.inf
    if eps > eps_max:
        logger.debug('corrector eps %.3g capped at %.3g (t=%.4g)', eps, eps_max, t)
        eps = eps_max
        if diagnostics is not None:
            diagnostics['eps_capped'] = diagnostics.get('eps_capped', 0) + 1
    return fold_point(x + eps * s + np.sqrt(2.0 * eps) * z, domain), float(eps)


def _reverse_loop(score, config, schedule, rng, domain, operator, gbar_scale=1.0,
                  corrector=False, x_init=None, diagnostics=None):
    x = _initial(score, config, rng, domain, x_init)
    ts = time_grid(config.steps, schedule)
    crng = rng.spawn(1)[0] if corrector else None
    for i in range(int(config.steps)):
        t, dt = ts[i], ts[i] - ts[i + 1]
        if corrector:
            x, _ = langevin_corrector(x, t, score, config.snr, crng, config.eps_max,
                                      domain, diagnostics, step=i)
        s = _evaluate_score(score, x, t, step=i)
        g = schedule.gbar(t)
        gh = gbar_scale * g
        noise = rng.standard_normal(x.shape)
        x = operator(x + 0.5 * (g * g + gh * gh) * s * dt + gh * np.sqrt(dt) * noise, domain)
    return x


@register_sampler('reflect-em')
def reverse_em_reflect(score, config, schedule, rng, domain=None, x_init=None, diagnostics=None):
    """Reverse Euler-Maruyama with reflection after every step."""
    domain = _default_domain(score, domain)
    return _reverse_loop(score, config, schedule, rng, domain, fold_point,
                         x_init=x_init, diagnostics=diagnostics)


@register_sampler('project-em')
def reverse_em_project(score, config, schedule, rng, domain=None, x_init=None, diagnostics=None):
    domain = _default_domain(score, domain)
    return _reverse_loop(score, config, schedule, rng, domain, project,
                         x_init=x_init, diagnostics=diagnostics)


@register_sampler('pc')
def pc_sample(score, config, schedule, rng, domain=None, x_init=None, diagnostics=None):
    """Corrector then reflect-EM predictor at each tick.

    The corrector draws from a child stream, so snr = 0 reproduces the
    reflect-EM trajectory for the same seed.
    """
    domain = _default_domain(score, domain)
    return _reverse_loop(score, config, schedule, rng, domain, fold_point, corrector=True,
                         x_init=x_init, diagnostics=diagnostics)


@register_sampler('annealed')
def annealed_sde_sample(score, config, schedule, rng, domain=None, x_init=None, diagnostics=None):
    """Reflected EM with noise level gh = gbar_scale * gbar; all levels share marginals."""
    domain = _default_domain(score, domain)
    return _reverse_loop(score, config, schedule, rng, domain, fold_point,
                         gbar_scale=config.gbar_scale, x_init=x_init, diagnostics=diagnostics)


def _ode_velocity(score, schedule, x, t):
    g = schedule.gbar(t)
    return -0.5 * g * g * _evaluate_score(score, x, t)


def ode_solve(score, config, schedule, x_init, domain=None, keep_trajectory=False):
    """Integrate the probability-flow ODE from t = 1 down to t_min.

    Points that leave the domain are projected back after each step and
    counted in `exits`; with an exact score this stays 0 up to round-off.
    """
    domain = _default_domain(score, domain)
    x = np.array(x_init, dtype=np.float64, copy=True).reshape(-1, domain.dim)
    if config.ode_solver == 'rk45':
        return _ode_adaptive(score, config, schedule, x, domain, keep_trajectory)

    ts = time_grid(config.steps, schedule)
    trajectory = [x.copy()] if keep_trajectory else None
    exits = 0
    for i in range(int(config.steps)):
        t, h = ts[i], ts[i + 1] - ts[i]
        k1 = _ode_velocity(score, schedule, x, t)
        k2 = _ode_velocity(score, schedule, x + 0.5 * h * k1, t + 0.5 * h)
        k3 = _ode_velocity(score, schedule, x + 0.5 * h * k2, t + 0.5 * h)
        k4 = _ode_velocity(score, schedule, x + h * k3, ts[i + 1])
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        outside = (x < 0.0) | (x > 1.0)
        if np.any(outside):
            exits += int(outside.any(axis=-1).sum())
            x = project(x, domain)
        if keep_trajectory:
            trajectory.append(x.copy())
    if exits:
        logger.info('ode_solve: %d projected exit(s) over %d steps', exits, config.steps)
    return OdeResult(x=x, times=ts, trajectory=trajectory, exits=exits, nfev=4 * int(config.steps))


def _ode_adaptive(score, config, schedule, x, domain, keep_trajectory):
    shape = x.shape

    def ode_func(t, x_flat):
        return _ode_velocity(score, schedule, x_flat.reshape(shape), t).ravel()

    start = time.monotonic()
    res = integrate.solve_ivp(ode_func, (1.0, schedule.t_min), x.ravel(),
                              rtol=config.rtol, atol=config.atol, method='RK45')
    if res.status == -1:
        t_reached = float(res.t[-1]) if len(res.t) else 1.0
        logger.error('adaptive ODE failed at t=%.6g: %s', t_reached, res.message)
        raise StepSizeUnderflowError(f'adaptive ODE stalled at t={t_reached:.6g}: {res.message}',
                                     t_reached=t_reached)
    logger.info('adaptive ODE: nfev=%d in %.2fs', res.nfev, time.monotonic() - start)
    x = res.y[:, -1].reshape(shape)
    outside = (x < 0.0) | (x > 1.0)
    exits = int(outside.any(axis=-1).sum())
    if exits:
        x = project(x, domain)
    trajectory = [res.y[:, j].reshape(shape) for j in range(res.y.shape[1])] if keep_trajectory else None
    return OdeResult(x=x, times=res.t, trajectory=trajectory, exits=exits, nfev=int(res.nfev))


@register_sampler('ode')
def ode_sample(score, config, schedule, rng, domain=None, x_init=None, diagnostics=None):
    domain = _default_domain(score, domain)
    x0 = _initial(score, config, rng, domain, x_init)
    result = ode_solve(score, config, schedule, x0, domain)
    if diagnostics is not None:
        diagnostics['exits'] = result.exits
        diagnostics['nfev'] = result.nfev
    return result.x


# --- thresholding ---

def threshold_static_step(x, t, dt, score, rng, schedule=None, step=None):
    """Clamp the drift update, then add noise."""
    schedule = schedule or NoiseSchedule()
    g = schedule.gbar(t)
    s = _evaluate_score(score, x, t, step=step)
    x_mean = np.clip(x + g * g * s * dt, 0.0, 1.0)
    return x_mean + g * np.sqrt(dt) * rng.standard_normal(x.shape)


def dynamic_threshold(x, percentile):
    """Rescale u = 2x - 1 by max(q_p(|u|), 1) per point, clamp, map back."""
    if not 0.0 < percentile <= 1.0:
        raise ValueError(f'percentile must lie in (0, 1], got {percentile}')
    u = 2.0 * np.asarray(x, dtype=np.float64) - 1.0
    scale = np.maximum(np.quantile(np.abs(u), percentile, axis=-1, keepdims=True), 1.0)
    return 0.5 * (np.clip(u / scale, -1.0, 1.0) + 1.0)


def threshold_dynamic_step(x, t, dt, score, rng, schedule=None,
                           percentile=SAMPLER_DEFAULTS['percentile'], step=None):
    schedule = schedule or NoiseSchedule()
    g = schedule.gbar(t)
    s = _evaluate_score(score, x, t, step=step)
    x_mean = dynamic_threshold(x + g * g * s * dt, percentile)
    return x_mean + g * np.sqrt(dt) * rng.standard_normal(x.shape)


def _threshold_loop(step_fn, score, config, schedule, rng, domain, x_init):
    x = _initial(score, config, rng, domain, x_init)
    ts = time_grid(config.steps, schedule)
    for i in range(int(config.steps)):
        x = step_fn(x, ts[i], ts[i] - ts[i + 1], i)
    return project(x, domain)


@register_sampler('threshold-static')
def threshold_static_sample(score, config, schedule, rng, domain=None, x_init=None, diagnostics=None):
    domain = _default_domain(score, domain)
    return _threshold_loop(
        lambda x, t, dt, i: threshold_static_step(x, t, dt, score, rng, schedule, step=i),
        score, config, schedule, rng, domain, x_init)


@register_sampler('threshold-dynamic')
def threshold_dynamic_sample(score, config, schedule, rng, domain=None, x_init=None, diagnostics=None):
    domain = _default_domain(score, domain)
    return _threshold_loop(
        lambda x, t, dt, i: threshold_dynamic_step(x, t, dt, score, rng, schedule, config.percentile, step=i),
        score, config, schedule, rng, domain, x_init)


def run_sampler(score, config, schedule, rng, domain=None, x_init=None):
    """Dispatch on config.method; returns a SampleResult with diagnostics."""
    fn = get_sampler(config.method)
    diagnostics = {}
    start = time.monotonic()
    x = fn(score, config, schedule, rng, domain=domain, x_init=x_init, diagnostics=diagnostics)
    diagnostics['seconds'] = round(time.monotonic() - start, 3)
    logger.info('sampler %s: %d chains x %d steps in %.2fs',
                config.method, x.shape[0], config.steps, diagnostics['seconds'])
    return SampleResult(x=x, method=config.method, steps=int(config.steps),
                        seed=int(config.seed), diagnostics=diagnostics)
