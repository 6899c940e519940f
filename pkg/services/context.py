"""Builders shared by the command services: schedule, kernel, scores, output dir."""
import logging
import os

from db.artifacts import ensure_dir
from engine.geometry import Domain, parse_domain
from engine.kernel import ReflectedKernel
from engine.network import NetworkScore
from engine.samplers import SamplerConfig
from engine.schedule import NoiseSchedule
from engine.score import ExactScore, ZeroScore, get_toy
from models.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)


def build_schedule(cfg):
    s = cfg.section('schedule')
    return NoiseSchedule(sigma0=s['sigma0'], sigma1=s['sigma1'], t_min=s['t_min'])


def build_kernel(cfg):
    k = cfg.section('kernel')
    return ReflectedKernel(crossover_sigma=k['crossover_sigma'], n_image_terms=k['n_image_terms'],
                           n_eigen_terms=k['n_eigen_terms'], underflow_floor=k['underflow_floor'])


def build_sampler_config(cfg, **overrides):
    s = cfg.section('sampler')
    fields = {key: s[key] for key in ('method', 'steps', 'snr', 'gbar_scale', 'percentile',
                                      'eps_max', 'ode_solver', 'atol', 'rtol', 'n_samples')}
    fields['seed'] = cfg.seed
    fields.update(overrides)
    return SamplerConfig(**fields)


def build_domain(cfg):
    return parse_domain(cfg.get('domain', 'kind'))


def build_toy(cfg, name=None):
    name = name or cfg.get('data', 'name')
    dim = cfg.get('data', 'dim') if name == 'uniform' else None
    return get_toy(name, dim)


def load_score(cfg, kind, checkpoint_path):
    """Return (score, domain, schedule) for 'exact', 'zero' or 'checkpoint'."""
    schedule = build_schedule(cfg)
    kernel = build_kernel(cfg)
    if kind == 'checkpoint':
        ckpt = load_checkpoint(checkpoint_path)
        logger.info('loaded checkpoint %s (step %d)', checkpoint_path, ckpt['state'].step)
        score = NetworkScore(ckpt['network'], ckpt['state'].ema_params, ckpt['schedule'])
        return score, ckpt['domain'], ckpt['schedule']
    if kind == 'zero':
        dim = cfg.get('data', 'dim')
        domain = Domain.interval() if dim == 1 else Domain.cube(dim)
        return ZeroScore(dim), domain, schedule
    if kind == 'exact':
        toy = build_toy(cfg)
        return ExactScore(toy, schedule, kernel), toy.domain, schedule
    raise ValueError(f'unknown score kind {kind!r}; expected exact, zero or checkpoint')


def prepare_output(cfg, *parts):
    """Create the run directory (plus optional subdirectory) and write the resolved config."""
    out = ensure_dir(cfg.output_dir)
    cfg.write_resolved(out)
    return ensure_dir(os.path.join(out, *parts)) if parts else out
