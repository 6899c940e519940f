"""`elbo` command: per-point likelihood bounds and a bits-per-dim summary."""
import logging
import os

import numpy as np

from config.settings import ELBO_DEFAULTS
from db.artifacts import write_csv_atomic
from engine.errors import ConfigError, MissingArtifactError
from engine.geometry import Domain, stick_break_logdet
from engine.likelihood import elbo_dataset, summarize
from engine.rng import make_rng
from engine.score import ExactScore, PerturbedScore, toy_log_density
from engine.training import make_simplex_dataset, simplex_to_cube
from services.context import build_kernel, build_schedule, build_toy, load_score, prepare_output
from services.train_service import SIMPLEX_DATA

logger = logging.getLogger(__name__)

POINT_HEADER = ['index', 'total_nats', 'score_term', 'prior_term', 'reconstruction_term', 'bpd', 'std_error']
SUMMARY_HEADER = ['n_points', 'mean_total_nats', 'stderr_total_nats', 'mean_bpd', 'stderr_bpd', 'mean_nll_exact']
DATA_STREAM = 0x7FFFFFF2
MODELS = ('exact', 'zero', 'checkpoint', 'perturbed')


def build_points(cfg):
    """Return (cube_points, corrections, toy); toy is None for simplex data."""
    data = cfg.section('data')
    rng = make_rng(cfg.seed, DATA_STREAM)
    if data['name'] == SIMPLEX_DATA:
        cube = simplex_to_cube(make_simplex_dataset(data['dim'], data['n_points'], data['concentration'], rng))
        return cube, -stick_break_logdet(cube), None
    toy = build_toy(cfg)
    return toy.sample(data['n_points'], rng), np.zeros(data['n_points']), toy


def build_model(cfg, toy):
    """Return (score, schedule) for elbo.model."""
    e = cfg.section('elbo')
    model = e['model']
    if model not in MODELS:
        raise ConfigError(f'unknown elbo.model {model!r}; expected one of {MODELS}')
    if model in ('exact', 'perturbed'):
        if toy is None:
            raise ConfigError(f'elbo.model = {model} needs a closed-form toy dataset')
        schedule = build_schedule(cfg)
        score = ExactScore(toy, schedule, build_kernel(cfg))
        if model == 'perturbed':
            score = PerturbedScore(score, e['perturbation'])
        return score, schedule
    if model == 'checkpoint' and not e['checkpoint']:
        raise MissingArtifactError('elbo.model = checkpoint but elbo.checkpoint is empty')
    score, _, schedule = load_score(cfg, model, e['checkpoint'])
    return score, schedule


def run_elbo(cfg):
    e = cfg.section('elbo')
    if e['n_mc'] < ELBO_DEFAULTS['min_mc']:
        raise ConfigError(f"elbo.n_mc = {e['n_mc']} is below the floor of {ELBO_DEFAULTS['min_mc']}")
    out = prepare_output(cfg)
    points, corrections, toy = build_points(cfg)
    score, schedule = build_model(cfg, toy)
    if score.dim != points.shape[1]:
        raise ConfigError(f'model dimension {score.dim} does not match data dimension {points.shape[1]}')

    reports = elbo_dataset(points, score, schedule, e['n_mc'], cfg.seed, build_kernel(cfg),
                           logdet_corrections=corrections)
    rows = [[i, r.total_nats, r.score_term, r.prior_term, r.reconstruction_term, r.bpd, r.mc_std_error]
            for i, r in enumerate(reports)]
    points_path = write_csv_atomic(os.path.join(out, 'elbo_points.csv'), POINT_HEADER, rows)

    summary = summarize(reports)
    # -E log p_0 of the data under the closed-form target, when there is one
    if toy is not None:
        logp = toy_log_density(toy, points, 0.0, schedule, build_kernel(cfg))
        summary['mean_nll_exact'] = float(-np.mean(logp))
    else:
        summary['mean_nll_exact'] = float('nan')
    summary_path = write_csv_atomic(os.path.join(out, 'elbo_summary.csv'), SUMMARY_HEADER,
                                    [[summary[k] for k in SUMMARY_HEADER]])
    logger.info('ELBO over %d points: %.4f +- %.4f bpd', summary['n_points'],
                summary['mean_bpd'], summary['stderr_bpd'])
    return {'points_path': points_path, 'summary_path': summary_path, 'summary': summary,
            'domain': str(Domain.simplex(points.shape[1]) if toy is None else toy.domain)}
