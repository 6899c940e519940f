"""Tests for app.py — command dispatch and exit codes."""
import os

import pytest

import app
from app import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_MISSING, EXIT_OK, main
from engine.errors import NonFiniteError


@pytest.fixture
def config_file(tmp_path):
    def _write(text):
        path = tmp_path / 'run.cfg'
        path.write_text(text)
        return str(path)
    return _write


def test_kernel_check_exit_ok(tmp_path):
    out = str(tmp_path / 'kc')
    assert main(['kernel-check', '--out', out]) == EXIT_OK
    assert os.path.exists(os.path.join(out, 'kernel_check.csv'))
    assert os.path.exists(os.path.join(out, 'refldiff_debug.log'))


def test_malformed_config_exits_2(config_file):
    assert main(['sample', '--config', config_file('sampler.steps = lots')]) == EXIT_CONFIG
    assert main(['sample', '--config', config_file('no equals sign here')]) == EXIT_CONFIG


def test_out_of_range_value_exits_2(config_file):
    assert main(['sample', '--config', config_file('sampler.steps = 0')]) == EXIT_CONFIG


def test_unknown_command_exits_2():
    assert main(['fly']) == EXIT_CONFIG


def test_missing_config_file_exits_3(tmp_path):
    assert main(['sample', '--config', str(tmp_path / 'absent.cfg')]) == EXIT_MISSING


def test_missing_checkpoint_exits_3(config_file):
    text = 'sampler.score = checkpoint\nsampler.checkpoint = /nonexistent/model.rdck\n'
    assert main(['sample', '--config', config_file(text)]) == EXIT_MISSING


def test_elbo_with_too_few_draws_exits_2(config_file):
    assert main(['elbo', '--config', config_file('elbo.n_mc = 8')]) == EXIT_CONFIG


def test_seed_flag_reaches_the_samples(config_file, tmp_path):
    path = config_file('sampler.steps = 20\nsampler.n_samples = 50\n')
    out = str(tmp_path / 's')
    assert main(['sample', '--config', path, '--seed', '7', '--out', out]) == EXIT_OK
    with open(os.path.join(out, 'samples.csv')) as f:
        lines = f.read().splitlines()
    assert lines[1].split(',')[1] == '7'


def test_numerical_failure_exits_1(monkeypatch):
    def boom(cfg):
        raise NonFiniteError('score produced NaN', context={'step': 3})

    monkeypatch.setitem(app.COMMANDS, 'sample', boom)
    assert main(['sample']) == EXIT_CHECK_FAILED
