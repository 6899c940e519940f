"""Feed-forward score network with hand-written backpropagation.

Layout per hidden layer: Linear -> LayerNorm (gain, bias) -> Swish.
Input is concat(2x - 1, embed(log noise_std(t))); the raw output is divided
by noise_std(t), so raw targets stay O(1) across noise levels.

Parameters live in a plain dict keyed by block name, in declaration order:
  hidden.{i}.weight, hidden.{i}.bias, hidden.{i}.ln_gain, hidden.{i}.ln_bias, ...
  out.weight, out.bias
"""
import numpy as np
from scipy.special import expit

from config.settings import TRAIN_DEFAULTS
from engine.score import ScoreFunction

LN_EPS = 1e-5


def time_embedding(log_std, dim):
    """Sinusoidal features of log noise_std over geometric frequencies."""
    half = dim // 2
    freqs = np.geomspace(1.0 / 16.0, 4.0, half)
    arg = np.asarray(log_std, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=1)


class ScoreNetwork:
    """Shape and maths of the MLP; parameters are passed in explicitly."""

    def __init__(self, dim, width=TRAIN_DEFAULTS['width'], depth=TRAIN_DEFAULTS['depth'],
                 embedding_dim=TRAIN_DEFAULTS['embedding_dim'], scale_output=True):
        if dim < 1 or width < 1 or depth < 1:
            raise ValueError('dim, width and depth must be positive')
        if embedding_dim < 2 or embedding_dim % 2:
            raise ValueError('embedding_dim must be an even number >= 2')
        self.dim = int(dim)
        self.width = int(width)
        self.depth = int(depth)
        self.embedding_dim = int(embedding_dim)
        self.scale_output = bool(scale_output)

    def shape_dict(self):
        return {'dim': self.dim, 'width': self.width, 'depth': self.depth,
                'embedding_dim': self.embedding_dim, 'scale_output': self.scale_output}

    def param_shapes(self):
        shapes = {}
        fan_in = self.dim + self.embedding_dim
        for i in range(self.depth):
            shapes[f'hidden.{i}.weight'] = (fan_in, self.width)
            shapes[f'hidden.{i}.bias'] = (self.width,)
            shapes[f'hidden.{i}.ln_gain'] = (self.width,)
            shapes[f'hidden.{i}.ln_bias'] = (self.width,)
            fan_in = self.width
        shapes['out.weight'] = (self.width, self.dim)
        shapes['out.bias'] = (self.dim,)
        return shapes

    def init_params(self, rng):
        """LeCun-normal weights, zero biases, unit LayerNorm gains."""
        params = {}
        for name, shape in self.param_shapes().items():
            if name.endswith('weight'):
                params[name] = rng.standard_normal(shape) / np.sqrt(shape[0])
            elif name.endswith('ln_gain'):
                params[name] = np.ones(shape)
            else:
                params[name] = np.zeros(shape)
        return params

    def forward(self, params, x, t, schedule):
        """Return (score, cache) for a batch x of shape (n, dim)."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        n = x.shape[0]
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
        std = np.asarray(schedule.noise_std(t)) if self.scale_output else np.ones(n)
        emb = time_embedding(np.log(np.asarray(schedule.noise_std(t))), self.embedding_dim)
        h = np.concatenate([2.0 * x - 1.0, emb], axis=1)
        layers = []
        for i in range(self.depth):
            z = h @ params[f'hidden.{i}.weight'] + params[f'hidden.{i}.bias']
            mu = z.mean(axis=1, keepdims=True)
            inv = 1.0 / np.sqrt(z.var(axis=1, keepdims=True) + LN_EPS)
            zhat = (z - mu) * inv
            y = params[f'hidden.{i}.ln_gain'] * zhat + params[f'hidden.{i}.ln_bias']
            sig = expit(y)
            layers.append((h, zhat, inv, y, sig))
            h = y * sig
        raw = h @ params['out.weight'] + params['out.bias']
        return raw / std[:, None], {'layers': layers, 'h': h, 'std': std}

    def backward(self, params, cache, d_out):
        """Gradients of sum(d_out * score) with respect to every parameter block."""
        grads = {}
        d_raw = d_out / cache['std'][:, None]
        grads['out.weight'] = cache['h'].T @ d_raw
        grads['out.bias'] = d_raw.sum(axis=0)
        dh = d_raw @ params['out.weight'].T
        for i in reversed(range(self.depth)):
            h_in, zhat, inv, y, sig = cache['layers'][i]
            dy = dh * (sig + y * sig * (1.0 - sig))
            grads[f'hidden.{i}.ln_gain'] = (dy * zhat).sum(axis=0)
            grads[f'hidden.{i}.ln_bias'] = dy.sum(axis=0)
            dzhat = dy * params[f'hidden.{i}.ln_gain']
            dz = inv * (dzhat - dzhat.mean(axis=1, keepdims=True)
                        - zhat * (dzhat * zhat).mean(axis=1, keepdims=True))
            grads[f'hidden.{i}.weight'] = h_in.T @ dz
            grads[f'hidden.{i}.bias'] = dz.sum(axis=0)
            dh = dz @ params[f'hidden.{i}.weight'].T
        return {name: grads[name] for name in params}


class NetworkScore(ScoreFunction):
    """A ScoreNetwork bound to a parameter set (usually the EMA copy)."""

    def __init__(self, network, params, schedule):
        self.network = network
        self.params = params
        self.schedule = schedule
        self.dim = network.dim

    def evaluate(self, x, t):
        out, _ = self.network.forward(self.params, x, t, self.schedule)
        return out
