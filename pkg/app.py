"""Refldiff — command-line entry point.

    python3 app.py <command> [--config PATH] [--seed N] [--out DIR]

Exit codes: 0 success, 1 check or numerical failure, 2 config error,
3 missing artifact.
"""
import argparse
import logging
import logging.handlers
import os
import sys
import time

from db.artifacts import ensure_dir
from engine.errors import ConfigError, MissingArtifactError, ReflDiffError
from models.run_config import RunConfig
from services.elbo_service import run_elbo
from services.guidance_service import run_guidance_demo
from services.kernel_check_service import run_kernel_check
from services.sample_service import run_sample
from services.thresholding_service import run_compare_thresholding
from services.train_service import run_train

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(name)s: %(message)s'
LOG_NAME = 'refldiff_debug.log'

logger = logging.getLogger('refldiff.cli')


def configure_logging(output_dir=None):
    """Console at INFO; once the run directory exists, a rotating DEBUG file beside the outputs."""
    handlers = [logging.StreamHandler()]
    if output_dir is not None:
        file_handler = logging.handlers.TimedRotatingFileHandler(
            os.path.join(ensure_dir(output_dir), LOG_NAME), when='midnight', backupCount=3, encoding='utf-8',
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)
    handlers[0].setLevel(logging.INFO)
    logging.basicConfig(level=logging.DEBUG, format=LOG_FORMAT, handlers=handlers, force=True)


def _kernel_check(cfg):
    result = run_kernel_check(cfg)
    for name, value, tol, status in result['rows']:
        print(f'{name:20s} {value:.3e}  (tol {tol:.0e})  {status}')
    if not result['passed']:
        print(f"kernel-check failed: {result['first_failure']}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _train(cfg):
    result = run_train(cfg)
    print(f"trained {result['steps']} steps, smoothed loss {result['final_smoothed_loss']:.5g}; "
          f"checkpoint {result['checkpoint']}")
    return EXIT_OK


def _sample(cfg):
    result = run_sample(cfg)
    print(f"{result['n_samples']} samples on {result['domain']} -> {result['path']}")
    return EXIT_OK


def _compare_thresholding(cfg):
    result = run_compare_thresholding(cfg)
    for method, steps, w1 in result['rows']:
        print(f'{method:18s} {steps:6d}  W1 {w1:.5f}')
    return EXIT_OK


def _elbo(cfg):
    result = run_elbo(cfg)
    s = result['summary']
    print(f"{s['n_points']} points: {s['mean_bpd']:.5f} +- {s['stderr_bpd']:.5f} bpd "
          f"({s['mean_total_nats']:.5f} nats)")
    return EXIT_OK


def _guidance_demo(cfg):
    result = run_guidance_demo(cfg)
    for w, method, w1, _ in result['rows']:
        print(f'w={w:<6g} {method:12s} W1 {w1:.5f}')
    return EXIT_OK


COMMANDS = {
    'kernel-check': _kernel_check,
    'train': _train,
    'sample': _sample,
    'compare-thresholding': _compare_thresholding,
    'elbo': _elbo,
    'guidance-demo': _guidance_demo,
}


def build_parser():
    parser = argparse.ArgumentParser(prog='refldiff', description='Reflected diffusion models on [0,1]^d.')
    parser.add_argument('command', choices=sorted(COMMANDS))
    parser.add_argument('--config', help='section.key = value file; defaults apply when omitted')
    parser.add_argument('--seed', type=int, help='overrides run.seed')
    parser.add_argument('--out', help='overrides run.output_dir')
    return parser


def load_config(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    return cfg.with_overrides(seed=args.seed, output_dir=args.out)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    configure_logging()
    started = time.monotonic()
    code = EXIT_OK
    try:
        cfg = load_config(args)
        configure_logging(cfg.output_dir)
        logger.info('%s: seed=%d out=%s', args.command, cfg.seed, cfg.output_dir)
        code = COMMANDS[args.command](cfg)
    except ConfigError as e:
        logger.error('config error: %s', e)
        code = EXIT_CONFIG
    except MissingArtifactError as e:
        logger.error('missing artifact: %s', e)
        code = EXIT_MISSING
    except ReflDiffError as e:
        logger.error('%s failed: %s (%s)', args.command, e, type(e).__name__)
        code = EXIT_CHECK_FAILED
    except ValueError as e:
        # out-of-range values rejected by the engine constructors
        logger.error('invalid setting: %s', e)
        code = EXIT_CONFIG
    logger.info('%s finished with exit code %d in %.1fs', args.command, code, time.monotonic() - started)
    return code


if __name__ == '__main__':
    sys.exit(main())
