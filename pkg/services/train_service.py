"""`train` command: fit a score network on a named dataset."""
import logging
import os

import numpy as np

from db.artifacts import write_csv_atomic
from engine.errors import NonFiniteError
from engine.geometry import Domain
from engine.network import ScoreNetwork
from engine.rng import make_rng
from engine.training import TrainConfig, TrainState, make_simplex_dataset, simplex_to_cube, train
from models.checkpoint import load_checkpoint, save_checkpoint
from services import plotting
from services.context import build_kernel, build_schedule, build_toy, prepare_output

logger = logging.getLogger(__name__)

LOSS_HEADER = ['step', 'train_loss', 'train_loss_ema', 'val_loss']
SIMPLEX_DATA = 'simplex-dirichlet'
# stream ids for dataset draws and initialization, disjoint from per-step streams
DATA_STREAM = 0x7FFFFFF0
INIT_STREAM = 0x7FFFFFF1


def build_dataset(cfg):
    """Return (train_points, val_points, domain) in training (cube) coordinates."""
    data = cfg.section('data')
    rng = make_rng(cfg.seed, DATA_STREAM)
    n = data['n_train'] + data['n_val']
    if data['name'] == SIMPLEX_DATA:
        points = simplex_to_cube(make_simplex_dataset(data['dim'], n, data['concentration'], rng))
        domain = Domain.simplex(data['dim'])
    else:
        toy = build_toy(cfg)
        points = toy.sample(n, rng)
        domain = toy.domain
    return points[:data['n_train']], points[data['n_train']:], domain


def build_train_config(cfg):
    t = cfg.section('train')
    return TrainConfig(
        learning_rate=t['learning_rate'], batch_size=t['batch_size'], total_steps=t['total_steps'],
        ema_rate=t['ema_rate'], beta1=t['beta1'], beta2=t['beta2'], adam_eps=t['adam_eps'],
        grad_clip=t['grad_clip'], loss_smoothing=t['loss_smoothing'],
        checkpoint_every=t['checkpoint_every'], seed=cfg.seed,
    )


def run_train(cfg):
    out = prepare_output(cfg)
    schedule = build_schedule(cfg)
    kernel = build_kernel(cfg)
    config = build_train_config(cfg)
    data_train, data_val, domain = build_dataset(cfg)
    t = cfg.section('train')
    ckpt_path = os.path.join(out, 'checkpoint.rdck')

    if t['resume']:
        loaded = load_checkpoint(t['resume'])
        network, state = loaded['network'], loaded['state']
        logger.info('resuming from %s at step %d', t['resume'], state.step)
    else:
        network = ScoreNetwork(data_train.shape[1], t['width'], t['depth'], t['embedding_dim'])
        state = TrainState.fresh(network.init_params(make_rng(cfg.seed, INIT_STREAM)))

    def checkpoint(s):
        save_checkpoint(ckpt_path, network, s, schedule, domain, cfg.seed)

    def write_losses(s):
        return write_csv_atomic(os.path.join(out, 'loss.csv'), LOSS_HEADER, s.history)

    try:
        state = train(network, state, data_train, data_val, config, schedule, kernel,
                      on_checkpoint=checkpoint)
    except NonFiniteError:
        write_losses(state)
        logger.error('training aborted on a non-finite value; last finite checkpoint kept at %s', ckpt_path)
        raise
    checkpoint(state)
    loss_path = write_losses(state)
    if cfg.get('run', 'plot') and state.history:
        hist = np.asarray(state.history, dtype=np.float64)
        plotting.render_curves(os.path.join(out, 'loss.svg'), hist[:, 0],
                               {'train (smoothed)': hist[:, 2], 'val': hist[:, 3]},
                               xlabel='step', ylabel='CDSM loss')
    return {
        'checkpoint': ckpt_path,
        'loss_csv': loss_path,
        'steps': state.step,
        'final_smoothed_loss': float(state.smoothed_loss),
        'history': state.history,
    }
