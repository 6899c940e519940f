"""`compare-thresholding` command.

Static thresholding, dynamic thresholding, projection and reflection are
each run along a step ladder from the same score and compared against a
fine reflect-EM reference. A second reference draw with an independent
stream gives the noise floor, written as the `reference` row.
"""
import logging
import os
from dataclasses import replace

from db.artifacts import write_csv_atomic
from engine.errors import ConfigError
from engine.metrics import sliced_w1, wasserstein1_1d
from engine.rng import make_rng
from engine.samplers import run_sampler
from services.context import build_sampler_config, load_score, prepare_output

logger = logging.getLogger(__name__)

HEADER = ['method', 'steps', 'w1']
METHODS = ('threshold-static', 'threshold-dynamic', 'project-em', 'reflect-em')
REFERENCE_METHOD = 'reflect-em'


def distance(a, b, rng):
    """W1 in 1D, sliced W1 otherwise."""
    if a.shape[1] == 1:
        return wasserstein1_1d(a, b)
    return sliced_w1(a, b, rng=rng)


def run_ladder(score, schedule, domain, base_config, ladder, reference_steps, seed, methods=METHODS):
    """Return (rows, reference_points); each run draws from its own stream."""
    ref_config = replace(base_config, method=REFERENCE_METHOD, steps=int(reference_steps))
    reference = run_sampler(score, ref_config, schedule, make_rng(seed, 0), domain).x
    twin = run_sampler(score, ref_config, schedule, make_rng(seed, 1), domain).x
    metric_rng = make_rng(seed, 2)
    floor = distance(reference, twin, metric_rng)
    logger.info('reference self-distance at %d steps: %.5f', reference_steps, floor)
    rows = [['reference', int(reference_steps), floor]]
    for m, method in enumerate(methods):
        for steps in ladder:
            config = replace(base_config, method=method, steps=int(steps))
            x = run_sampler(score, config, schedule, make_rng(seed, 3 + m, int(steps)), domain).x
            w1 = distance(reference, x, metric_rng)
            logger.info('%s steps=%d W1=%.5f', method, steps, w1)
            rows.append([method, int(steps), w1])
    return rows, reference


def run_compare_thresholding(cfg):
    out = prepare_output(cfg)
    th = cfg.section('thresholding')
    if not th['ladder']:
        raise ConfigError('thresholding.ladder is empty')
    s = cfg.section('sampler')
    score, domain, schedule = load_score(cfg, s['score'], s['checkpoint'])
    if domain.is_simplex:
        raise ConfigError('compare-thresholding runs on the interval or the cube, not the simplex')
    base = build_sampler_config(cfg, n_samples=th['n_samples'])
    rows, _ = run_ladder(score, schedule, domain, base, th['ladder'], th['reference_steps'], cfg.seed)
    path = write_csv_atomic(os.path.join(out, 'thresholding.csv'), HEADER, rows)
    return {'path': path, 'rows': rows}
