"""Shared test fixtures — isolated output directory for every test."""
import os
import sys

import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


@pytest.fixture(autouse=True)
def temp_output(monkeypatch, tmp_path):
    """Redirect OUTPUT_DIR to a temp directory for every test."""
    out = str(tmp_path / 'runs')
    monkeypatch.setattr('config.settings.OUTPUT_DIR', out)
    return out


@pytest.fixture
def rng():
    from engine.rng import make_rng
    return make_rng(1234)


@pytest.fixture
def schedule():
    from engine.schedule import NoiseSchedule
    return NoiseSchedule()


@pytest.fixture
def make_config(temp_output):
    """Build a RunConfig from `section.key = value` text, writing into the temp output dir."""
    from models.run_config import RunConfig

    def _make(text=''):
        return RunConfig.from_text(text).with_overrides(output_dir=temp_output)

    return _make
