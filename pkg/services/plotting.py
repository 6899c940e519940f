"""SVG plots of loss curves and sample histograms.

Uses Figure() directly (not pyplot) so rendering is safe from worker threads.
"""
import io
import logging

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from db.artifacts import write_bytes_atomic

logger = logging.getLogger(__name__)


def _save(fig, path):
    buf = io.BytesIO()
    # fixed hashsalt and no date metadata so reruns give identical bytes
    with rc_context({"svg.hashsalt": "refldiff"}):
        fig.savefig(buf, format="svg", bbox_inches="tight", metadata={"Date": None})
    return write_bytes_atomic(path, buf.getvalue())


def render_curves(path, x, series, xlabel='', ylabel='', logy=True):
    """One line per entry of `series`; NaN points are skipped."""
    try:
        fig = Figure(figsize=(6, 4))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        for label, y in series.items():
            y = np.asarray(y, dtype=np.float64)
            keep = np.isfinite(y)
            if keep.any():
                ax.plot(np.asarray(x)[keep], y[keep], label=label)
        if logy:
            ax.set_yscale('log')
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend()
        return _save(fig, path)
    except (ValueError, OSError) as exc:
        logger.warning('Failed to render curves to %s: %s', path, exc)
        return None


def render_histogram(path, samples, reference_cdf=None, bins=60, title=''):
    """Density histogram of 1D samples, optionally overlaying a reference density."""
    try:
        fig = Figure(figsize=(6, 4))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        ax.hist(np.ravel(samples), bins=bins, range=(0.0, 1.0), density=True, alpha=0.6, label='samples')
        if reference_cdf is not None:
            grid = np.linspace(0.0, 1.0, 401)
            ax.plot(grid[1:], np.diff(reference_cdf(grid)) / np.diff(grid), label='target')
        ax.set_xlim(0.0, 1.0)
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)
    except (ValueError, OSError) as exc:
        logger.warning('Failed to render histogram to %s: %s', path, exc)
        return None
