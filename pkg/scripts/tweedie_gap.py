#!/usr/bin/env python3
"""Print posterior mean vs the Tweedie expression on [0, 1] and on the line.

On the interval the reflected kernel breaks Tweedie's formula near the
walls; with a plain Gaussian likelihood the two agree to quadrature
accuracy. Exit code 1 if either side of that contrast does not show up.

Usage:
    python3 scripts/tweedie_gap.py [--v 0.04] [--y 0.05 0.2 0.5]
"""
import argparse
import os
import sys

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from engine.kernel import posterior_mean_1d, posterior_mean_gaussian, tweedie_mean_1d, tweedie_mean_gaussian

GAP_THRESHOLD = 1e-3


def uniform_prior(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


def gap_table(ys, v):
    rows = []
    for y in ys:
        reflected = posterior_mean_1d(y, v, uniform_prior)
        reflected_tw = tweedie_mean_1d(y, v, uniform_prior)
        gauss = posterior_mean_gaussian(y, v, uniform_prior)
        gauss_tw = tweedie_mean_gaussian(y, v, uniform_prior)
        rows.append((y, reflected, reflected_tw, abs(reflected - reflected_tw),
                     gauss, gauss_tw, abs(gauss - gauss_tw)))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument('--v', type=float, default=0.04)
    parser.add_argument('--y', type=float, nargs='+', default=[0.05, 0.2, 0.5])
    args = parser.parse_args(argv)

    rows = gap_table(args.y, args.v)
    print(f"{'y':>6} {'E[x|y]':>10} {'tweedie':>10} {'gap':>10} | {'gauss':>10} {'tweedie':>10} {'gap':>10}")
    for row in rows:
        print(f'{row[0]:6.3f} ' + ' '.join(f'{val:10.6f}' for val in row[1:4]) + ' | '
              + ' '.join(f'{val:10.6f}' for val in row[4:]))

    bounded_gap = max(r[3] for r in rows)
    control_gap = max(r[6] for r in rows)
    print(f'\nmax gap on [0,1]: {bounded_gap:.3e}   max gap on the line: {control_gap:.3e}')
    if bounded_gap <= GAP_THRESHOLD or control_gap >= GAP_THRESHOLD:
        print('expected a reflected gap above and a Gaussian gap below', GAP_THRESHOLD)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
