"""Tests for scripts/tweedie_gap.py."""
from scripts.tweedie_gap import GAP_THRESHOLD, gap_table, main


def test_gap_only_on_the_interval():
    rows = gap_table([0.05, 0.2], 0.04)
    assert max(r[3] for r in rows) > GAP_THRESHOLD
    assert max(r[6] for r in rows) < GAP_THRESHOLD


def test_main_exit_ok(capsys):
    assert main([]) == 0
    assert 'max gap on [0,1]' in capsys.readouterr().out
