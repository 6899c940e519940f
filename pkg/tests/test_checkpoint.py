"""Tests for models/checkpoint.py."""
import os

import numpy as np
import pytest

from engine.errors import MissingArtifactError
from engine.geometry import Domain
from engine.network import ScoreNetwork
from engine.rng import make_rng
from engine.schedule import NoiseSchedule
from engine.training import TrainState
from models.checkpoint import MAGIC, load_checkpoint, save_checkpoint


@pytest.fixture
def saved(tmp_path):
    net = ScoreNetwork(dim=2, width=8, depth=2, embedding_dim=4)
    state = TrainState.fresh(net.init_params(make_rng(0)))
    state.step = 7
    path = str(tmp_path / 'ckpt' / 'model.ckpt')
    save_checkpoint(path, net, state, NoiseSchedule(0.02, 4.0, 1e-4), Domain.cube(2), seed=11)
    return path, net, state


def test_round_trip(saved):
    path, net, state = saved
    out = load_checkpoint(path)
    assert out['network'].shape_dict() == net.shape_dict()
    assert out['state'].step == 7
    assert np.isnan(out['state'].smoothed_loss)
    assert out['seed'] == 11
    assert out['domain'] == Domain.cube(2)
    assert out['schedule'].as_dict() == {'sigma0': 0.02, 'sigma1': 4.0, 't_min': 1e-4}
    for name in state.params:
        np.testing.assert_array_equal(out['state'].params[name], state.params[name])
        np.testing.assert_array_equal(out['state'].ema_params[name], state.ema_params[name])


def test_file_starts_with_magic(saved):
    with open(saved[0], 'rb') as f:
        assert f.read(4) == MAGIC


def test_missing_file(tmp_path):
    with pytest.raises(MissingArtifactError):
        load_checkpoint(str(tmp_path / 'nope.ckpt'))


def test_bad_magic(tmp_path):
    path = tmp_path / 'bad.ckpt'
    path.write_bytes(b'XXXX' + bytes(16))
    with pytest.raises(ValueError):
        load_checkpoint(str(path))


def test_truncated_payload(saved):
    path = saved[0]
    with open(path, 'rb') as f:
        data = f.read()
    with open(path, 'wb') as f:
        f.write(data[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_no_temp_files_left(saved):
    directory = os.path.dirname(saved[0])
    assert os.listdir(directory) == ['model.ckpt']
