"""Constrained denoising score matching: loss, optimizer, EMA and datasets.

Loss per batch, with t ~ U(t_min, 1) and x_t ~ K(x_0, .; v(0, t)):

  L = mean_{batch, dims} gbar(t)^2 * (s(x_t, t) - grad log K(x_t | x_0))^2

Adam with global-norm gradient clipping; EMA rate warmed up as
min(ema_rate, (1 + step) / (10 + step)).
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from config.settings import TRAIN_DEFAULTS
from engine.errors import NonFiniteError
from engine.geometry import stick_break_inv
from engine.kernel import DEFAULT_KERNEL, log_density_and_score_1d, sample_transition_nd, transition_score_nd
from engine.rng import make_rng
from engine.score import exact_score, toy_log_density

logger = logging.getLogger(__name__)

# fixed stream for validation draws, so val losses are comparable across steps
VAL_STREAM = 0x7FFFFFFF


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = TRAIN_DEFAULTS['learning_rate']
    batch_size: int = TRAIN_DEFAULTS['batch_size']
    total_steps: int = TRAIN_DEFAULTS['total_steps']
    ema_rate: float = TRAIN_DEFAULTS['ema_rate']
    beta1: float = TRAIN_DEFAULTS['beta1']
    beta2: float = TRAIN_DEFAULTS['beta2']
    adam_eps: float = TRAIN_DEFAULTS['adam_eps']
    grad_clip: float = TRAIN_DEFAULTS['grad_clip']
    loss_smoothing: float = TRAIN_DEFAULTS['loss_smoothing']
    checkpoint_every: int = TRAIN_DEFAULTS['checkpoint_every']
    val_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError('learning_rate must be >= 0')
        if self.batch_size < 1 or self.total_steps < 0:
            raise ValueError('batch_size must be >= 1 and total_steps >= 0')
        if not 0.0 <= self.ema_rate < 1.0:
            raise ValueError('ema_rate must lie in [0, 1)')


@dataclass
class TrainState:
    params: dict
    ema_params: dict
    adam_m: dict
    adam_v: dict
    step: int = 0
    smoothed_loss: float = float('nan')
    history: list = field(default_factory=list)

    @classmethod
    def fresh(cls, params):
        return cls(
            params=params,
            ema_params={k: v.copy() for k, v in params.items()},
            adam_m={k: np.zeros_like(v) for k, v in params.items()},
            adam_v={k: np.zeros_like(v) for k, v in params.items()},
        )


def _check_batch(batch):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[:, None]
    if batch.shape[0] == 0:
        raise ValueError('batch must contain at least one point')
    return batch


def cdsm_loss_and_grads(network, params, batch, schedule, rng, kernel=DEFAULT_KERNEL,
                        with_grads=True):
    """Monte Carlo CDSM loss and (optionally) its parameter gradients."""
    batch = _check_batch(batch)
    n, d = batch.shape
    t = rng.uniform(schedule.t_min, 1.0, size=n)
    v = np.asarray(schedule.accumulated_variance(0.0, t))
    x_t = sample_transition_nd(batch, v, rng)
    target = transition_score_nd(batch, x_t, v, kernel)
    s, cache = network.forward(params, x_t, t, schedule)
    weight = np.asarray(schedule.gbar(t)) ** 2
    resid = s - target
    per_point = weight * (resid * resid).mean(axis=1)
    loss = float(per_point.mean())
    if not np.isfinite(loss):
        row = int(np.argmax(~np.isfinite(per_point)))
        ctx = {'t': float(t[row]), 'x0': batch[row].tolist(), 'x_t': x_t[row].tolist()}
        logger.error('non-finite CDSM loss at %s', ctx)
        raise NonFiniteError('non-finite CDSM loss', context=ctx)
    if not with_grads:
        return loss, None
    d_s = 2.0 * weight[:, None] * resid / (n * d)
    return loss, network.backward(params, cache, d_s)


def cdsm_loss(network, params, batch, schedule, rng, kernel=DEFAULT_KERNEL):
    loss, _ = cdsm_loss_and_grads(network, params, batch, schedule, rng, kernel, with_grads=False)
    return loss


def clip_by_global_norm(grads, max_norm):
    """Scale all blocks so their joint L2 norm is at most max_norm (<= 0 disables)."""
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


def adam_update(params, grads, m, v, step, config):
    """One Adam step; returns new (params, m, v). `step` counts from 1."""
    b1, b2 = config.beta1, config.beta2
    new_p, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        new_m[name] = b1 * m[name] + (1.0 - b1) * g
        new_v[name] = b2 * v[name] + (1.0 - b2) * g * g
        m_hat = new_m[name] / (1.0 - b1 ** step)
        v_hat = new_v[name] / (1.0 - b2 ** step)
        new_p[name] = p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new_p, new_m, new_v


def ema_update(ema_params, params, rate):
    """ema <- rate * ema + (1 - rate) * params, blockwise."""
    if set(ema_params) != set(params):
        raise ValueError('EMA and parameter blocks differ')
    out = {}
    for name, p in params.items():
        e = ema_params[name]
        if e.shape != p.shape:
            raise ValueError(f'shape mismatch for {name}: {e.shape} vs {p.shape}')
        out[name] = rate * e + (1.0 - rate) * p
    return out


def train_step(network, state, batch, config, schedule, rng, kernel=DEFAULT_KERNEL):
    """One optimizer step. Returns (new_state, pre-step loss)."""
    loss, grads = cdsm_loss_and_grads(network, state.params, batch, schedule, rng, kernel)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            logger.error('non-finite gradient in block %s at step %d', name, state.step)
            raise NonFiniteError(f'non-finite gradient in {name}',
                                 context={'block': name, 'step': state.step})
    grads, norm = clip_by_global_norm(grads, config.grad_clip)
    params, m, v = adam_update(state.params, grads, state.adam_m, state.adam_v,
                               state.step + 1, config)
    rate = min(config.ema_rate, (1.0 + state.step) / (10.0 + state.step))
    ema = ema_update(state.ema_params, params, rate)
    if np.isnan(state.smoothed_loss):
        smoothed = loss
    else:
        smoothed = config.loss_smoothing * state.smoothed_loss + (1.0 - config.loss_smoothing) * loss
    new_state = TrainState(params=params, ema_params=ema, adam_m=m, adam_v=v,
                           step=state.step + 1, smoothed_loss=smoothed, history=state.history)
    return new_state, loss


def train(network, state, data_train, data_val, config, schedule, kernel=DEFAULT_KERNEL,
          on_checkpoint=None):
    """Run steps state.step .. total_steps - 1.

    Each step draws from make_rng(seed, step), so resuming from a saved
    state replays the same batches. On a non-finite loss or gradient the
    last finite state is handed to on_checkpoint before re-raising.
    """
    data_train = _check_batch(data_train)
    start = time.monotonic()
    while state.step < config.total_steps:
        rng = make_rng(config.seed, state.step)
        idx = rng.integers(0, data_train.shape[0], size=config.batch_size)
        try:
            new_state, loss = train_step(network, state, data_train[idx], config, schedule, rng, kernel)
        except NonFiniteError:
            if on_checkpoint is not None:
                on_checkpoint(state)
            raise
        state = new_state
        val = float('nan')
        if data_val is not None and (state.step % config.val_every == 0
                                     or state.step == config.total_steps):
            val = validation_loss(network, state.ema_params, data_val, schedule, config.seed, kernel)
        state.history.append((state.step, loss, state.smoothed_loss, val))
        if state.step % 100 == 0:
            logger.info('step %d  loss=%.4f  smoothed=%.4f', state.step, loss, state.smoothed_loss)
        if on_checkpoint is not None and config.checkpoint_every > 0 \
                and state.step % config.checkpoint_every == 0:
            on_checkpoint(state)
    logger.info('training finished at step %d in %.1fs', state.step, time.monotonic() - start)
    return state


def validation_loss(network, params, data_val, schedule, seed, kernel=DEFAULT_KERNEL):
    """CDSM loss on held-out points with fixed (t, noise) draws."""
    return cdsm_loss(network, params, data_val, schedule, make_rng(seed, VAL_STREAM), kernel)


# --- deterministic objectives by quadrature ---

def _legendre(n, lo, hi):
    nodes, weights = np.polynomial.legendre.leggauss(int(n))
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


def csm_objective_quadrature(score_fn, toy, schedule, t_range, n_t=24, n_x=300):
    """int gbar^2 int p_t(x) (s - grad log p_t)^2 dx dt on a 1D toy."""
    ts, wt = _legendre(n_t, *t_range)
    xs, wx = _legendre(n_x, 0.0, 1.0)
    total = 0.0
    for t, w in zip(ts, wt):
        p = np.exp(toy_log_density(toy, xs[:, None], t, schedule))
        diff = score_fn(xs[:, None], t)[:, 0] - exact_score(toy, xs[:, None], t, schedule)[:, 0]
        total += w * schedule.gbar(t) ** 2 * float((wx * p * diff * diff).sum())
    return total


def cdsm_objective_quadrature(score_fn, toy, schedule, t_range, n_t=24, n_x=300, n_x0=300,
                              kernel=DEFAULT_KERNEL):
    """int gbar^2 int int p_0(x0) K(x0, x) (s(x) - grad log K)^2 dx dx0 dt on a 1D toy."""
    ts, wt = _legendre(n_t, *t_range)
    xs, wx = _legendre(n_x, 0.0, 1.0)
    x0s, wx0 = _legendre(n_x0, 0.0, 1.0)
    p0 = wx0 * np.exp(toy_log_density(toy, x0s[:, None], 0.0, schedule))
    total = 0.0
    for t, w in zip(ts, wt):
        v = schedule.accumulated_variance(0.0, t)
        logk, target = log_density_and_score_1d(x0s[:, None], xs[None, :], v, kernel)
        s = score_fn(xs[:, None], t)[:, 0]
        inner = (np.exp(logk) * (s[None, :] - target) ** 2) @ wx
        total += w * schedule.gbar(t) ** 2 * float((p0 * inner).sum())
    return total


def csm_excess(score_fn, toy, schedule, n_t=48, n_x=400):
    """Mean over log t of gbar^2 E_{p_t}|s - s*|^2 * t; zero iff s is exact."""
    us, wu = _legendre(n_t, np.log(schedule.t_min), 0.0)
    xs, wx = _legendre(n_x, 0.0, 1.0)
    grid = np.stack(np.meshgrid(*([xs] * toy.dim), indexing='ij'), axis=-1).reshape(-1, toy.dim)
    wgrid = np.prod(np.stack(np.meshgrid(*([wx] * toy.dim), indexing='ij'), axis=-1).reshape(-1, toy.dim), axis=1)
    total = 0.0
    for u, w in zip(us, wu):
        t = float(np.exp(u))
        p = np.exp(toy_log_density(toy, grid, t, schedule))
        diff = score_fn(grid, t) - exact_score(toy, grid, t, schedule)
        total += w * t * schedule.gbar(t) ** 2 * float((wgrid * p * (diff * diff).sum(axis=1)).sum())
    return total / (0.0 - np.log(schedule.t_min))


# --- datasets ---

def make_simplex_dataset(d, n, concentration, rng, clip=1e-6):
    """n Dirichlet draws on the projected simplex, clipped to its interior.

    `concentration` has d + 1 entries (the last is the slack coordinate) or
    is a scalar broadcast to all of them.
    """
    if d < 2:
        raise ValueError('simplex datasets need d >= 2')
    alpha = np.broadcast_to(np.asarray(concentration, dtype=np.float64), (d + 1,))
    y = rng.dirichlet(alpha, size=int(n))[:, :d]
    y = np.maximum(y, clip)
    total = y.sum(axis=1)
    over = total > 1.0 - clip
    y[over] *= ((1.0 - clip) / total[over])[:, None]
    return y


def simplex_to_cube(points):
    """Training coordinates for simplex data."""
    return stick_break_inv(points)
