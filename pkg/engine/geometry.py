"""Bounded domains and their elementary operators.

Domains:
  interval  [0, 1]
  cube      [0, 1]^d
  simplex   {x in R^d : x_i >= 0, sum x_i <= 1}   (d free coordinates)

Operators:
  fold(x)            period-2 triangle wave, r = x mod 2, r if r <= 1 else 2 - r
  project(p)         Euclidean nearest point of the domain
  stick_break(x)     y_i = x_i * prod_{j>i} (1 - x_j)       cube -> simplex
  stick_break_inv(y) x_i = y_i / prod_{j>i} (1 - x_j)        simplex -> cube
"""
import logging
from dataclasses import dataclass

import numpy as np

from engine.errors import BoundaryDegeneracyError

logger = logging.getLogger(__name__)

INTERVAL = 'interval'
CUBE = 'cube'
SIMPLEX = 'simplex'

# smallest normal double; the running product keeps relative precision down to it
DEGENERACY_TOL = float(np.finfo(np.float64).tiny)


@dataclass(frozen=True)
class Domain:
    kind: str
    dim: int = 1

    def __post_init__(self):
        if self.kind not in (INTERVAL, CUBE, SIMPLEX):
            raise ValueError(f'unknown domain kind: {self.kind!r}')
        if int(self.dim) < 1:
            raise ValueError(f'domain dim must be >= 1, got {self.dim}')
        if self.kind == INTERVAL and self.dim != 1:
            raise ValueError('interval domain has dim 1')

    @classmethod
    def interval(cls):
        return cls(INTERVAL, 1)

    @classmethod
    def cube(cls, dim):
        return cls(CUBE, int(dim))

    @classmethod
    def simplex(cls, dim):
        return cls(SIMPLEX, int(dim))

    @property
    def is_simplex(self):
        return self.kind == SIMPLEX

    def __str__(self):
        return self.kind if self.kind == INTERVAL else f'{self.kind}:{self.dim}'


def parse_domain(text):
    """Parse 'interval', 'cube:3' or 'simplex:100' into a Domain."""
    kind, _, dim = str(text).strip().partition(':')
    return Domain(kind, int(dim) if dim else 1)


def _require_finite(x, name):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError(f'{name} must be finite')
    return x


def fold(x):
    """Reflect x into [0, 1]; works elementwise on arrays."""
    x = _require_finite(x, 'x')
    r = np.mod(x, 2.0)
    out = np.where(r <= 1.0, r, 2.0 - r)
    return float(out) if out.ndim == 0 else out


def fold_point(p, domain):
    """Componentwise fold on the interval or cube."""
    if domain.is_simplex:
        raise ValueError('fold is undefined on the simplex; map to the cube with stick_break_inv first')
    p = _require_finite(p, 'p')
    r = np.mod(p, 2.0)
    return np.where(r <= 1.0, r, 2.0 - r)


def _project_simplex(p):
    """Nearest point of {x >= 0, sum x <= 1}, rowwise on the last axis."""
    clipped = np.maximum(p, 0.0)
    inside = clipped.sum(axis=-1) <= 1.0
    if np.all(inside):
        return clipped
    # Sort-based threshold so that sum(max(p - tau, 0)) = 1
    u = -np.sort(-p, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, p.shape[-1] + 1)
    cond = u - css / k > 0
    rho = p.shape[-1] - 1 - np.argmax(cond[..., ::-1], axis=-1)
    tau = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    on_face = np.maximum(p - tau, 0.0)
    return np.where(inside[..., None], clipped, on_face)


def project(p, domain):
    """Euclidean projection onto the domain (rows of a batch independently)."""
    p = _require_finite(p, 'p')
    if domain.is_simplex:
        return _project_simplex(np.atleast_1d(p))
    return np.clip(p, 0.0, 1.0)


def contains(p, domain, tol=0.0):
    """True when every row of p lies in the closed domain."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1:] != (domain.dim,) and not (domain.dim == 1 and p.ndim <= 1):
        return False
    ok = np.all((p >= -tol) & (p <= 1.0 + tol))
    if domain.is_simplex:
        ok = ok and np.all(np.atleast_1d(p).sum(axis=-1) <= 1.0 + tol)
    return bool(ok)


def _tail_products(x):
    """tail_i = prod_{j>i} (1 - x_j) along the last axis."""
    one_minus = 1.0 - x
    rev = np.cumprod(one_minus[..., ::-1], axis=-1)[..., ::-1]
    return np.concatenate([rev[..., 1:], np.ones_like(x[..., :1])], axis=-1)


def stick_break(x):
    """Map cube points to the projected simplex."""
    x = _require_finite(x, 'x')
    x = np.atleast_1d(x)
    return x * _tail_products(x)


def stick_break_inv(y, tol=DEGENERACY_TOL):
    """Map simplex points back to the cube.

    Walks down from the last coordinate with the running stick length
    R_d = 1, R_i = R_{i+1} * (1 - x_{i+1}), x_i = y_i / R_i. The product keeps
    full relative precision where 1 - sum_{j>i} y_j would cancel.

    Raises BoundaryDegeneracyError when some R_i <= tol.
    """
    y = _require_finite(y, 'y')
    y = np.atleast_1d(y)
    d = y.shape[-1]
    x = np.empty_like(y)
    remaining = np.ones(y.shape[:-1])
    for i in range(d - 1, -1, -1):
        if i < d - 1:
            remaining = remaining * (1.0 - x[..., i + 1])
        degenerate = remaining <= tol
        if np.any(degenerate):
            logger.warning('stick_break_inv: degenerate stick length at coordinate %d', i)
            raise BoundaryDegeneracyError(
                f'simplex point on a degenerate face (first index [{i}]); '
                f'remaining stick length <= {tol:g}'
            )
        x[..., i] = np.clip(y[..., i] / remaining, 0.0, 1.0)
    return x


def stick_break_logdet(x):
    """log |det d stick_break / dx|.

    The Jacobian is triangular with diagonal prod_{j>i} (1 - x_j), so the
    log-determinant is sum_j (j - 1) * log(1 - x_j) with 1-based j.
    Returns -inf (and logs a warning) when some x_j = 1 for j >= 2.
    """
    x = _require_finite(x, 'x')
    x = np.atleast_1d(x)
    d = x.shape[-1]
    weights = np.arange(d, dtype=np.float64)
    one_minus = 1.0 - x
    collapsed = (one_minus[..., 1:] <= 0.0).any(axis=-1)
    with np.errstate(divide='ignore'):
        logs = np.where(weights > 0, np.log(np.maximum(one_minus, 0.0)), 0.0)
    out = (weights * logs).sum(axis=-1)
    if np.any(collapsed):
        logger.warning('stick_break_logdet: collapsed stick, log-det is -inf')
        out = np.where(collapsed, -np.inf, out)
    return float(out) if np.ndim(out) == 0 else out


def uniform_sample(domain, rng, n=None):
    """Exact uniform draws on the domain.

    The simplex uses independent x_j ~ Beta(1, j) followed by stick_break:
    the slack-inclusive uniform simplex is Dirichlet(1, ..., 1), whose
    stick-breaking coordinates are independent Beta(1, j) variables.
    """
    size = (domain.dim,) if n is None else (int(n), domain.dim)
    if not domain.is_simplex:
        out = rng.random(size)
        return out[..., 0] if domain.kind == INTERVAL and n is None else out
    b = np.arange(1, domain.dim + 1, dtype=np.float64)
    x = rng.beta(1.0, np.broadcast_to(b, size))
    return stick_break(x)
