"""`sample` command: draw from an exact toy score or a trained checkpoint."""
import logging
import os

from db.artifacts import write_csv_atomic
from engine.errors import MissingArtifactError
from engine.geometry import Domain, stick_break
from engine.rng import make_rng
from engine.samplers import run_sampler
from engine.score import toy_cdf_1d
from services import plotting
from services.context import build_kernel, build_sampler_config, build_toy, load_score, prepare_output

logger = logging.getLogger(__name__)


def sample_header(dim):
    return ['chain', 'seed', 'method', 'steps'] + [f'x{i}' for i in range(dim)]


def sample_rows(x, method, steps, seed):
    return [[i, seed, method, steps] + [float(v) for v in row] for i, row in enumerate(x)]


def draw_samples(cfg, sampler_config=None, rng=None):
    """Run the configured sampler and return (points, domain, result).

    Simplex checkpoints are sampled in cube coordinates and mapped back
    with stick_break, so `points` always lives on the data domain.
    """
    s = cfg.section('sampler')
    if s['score'] == 'checkpoint' and not s['checkpoint']:
        raise MissingArtifactError('sampler.score = checkpoint but sampler.checkpoint is empty')
    score, domain, schedule = load_score(cfg, s['score'], s['checkpoint'])
    config = sampler_config or build_sampler_config(cfg)
    rng = rng if rng is not None else make_rng(config.seed)
    run_domain = Domain.cube(domain.dim) if domain.is_simplex else domain
    result = run_sampler(score, config, schedule, rng, run_domain)
    points = stick_break(result.x) if domain.is_simplex else result.x
    return points, domain, result


def run_sample(cfg):
    out = prepare_output(cfg)
    points, domain, result = draw_samples(cfg)
    path = write_csv_atomic(os.path.join(out, 'samples.csv'), sample_header(domain.dim),
                            sample_rows(points, result.method, result.steps, result.seed))
    logger.info('wrote %d samples on %s to %s', len(points), domain, path)

    if cfg.get('run', 'plot') and domain.dim == 1:
        reference = None
        if cfg.get('sampler', 'score') == 'exact':
            reference = toy_cdf_1d(build_toy(cfg), 0.0, kernel=build_kernel(cfg))
        plotting.render_histogram(os.path.join(out, 'samples.svg'), points, reference,
                                  title=f'{result.method}, {result.steps} steps')
    return {
        'path': path,
        'n_samples': int(len(points)),
        'domain': str(domain),
        'diagnostics': result.diagnostics,
    }
