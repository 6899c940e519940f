"""Refldiff — centralized configuration."""
import os
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUTPUT_DIR = os.environ.get('REFLDIFF_OUTPUT_DIR', os.path.join(BASE_DIR, 'runs'))

# Caps thread-level parallelism (batch ELBO evaluation)
THREADS = max(1, int(os.environ.get('REFLDIFF_THREADS', '1')))

# Reflected heat kernel
KERNEL_DEFAULTS = {
    'crossover_sigma': 0.35,
    'n_image_terms': 5,
    'n_eigen_terms': 5,
    'underflow_floor': 1e-300,
    # Truncation estimates above this emit a warning row in kernel-check
    'truncation_tolerance': 1e-8,
}

# RVE SDE schedule (sample-quality runs)
SCHEDULE_DEFAULTS = {
    'sigma0': 0.01,
    'sigma1': 5.0,
    't_min': 1e-5,
}

# Likelihood runs use a smaller sigma0
LIKELIHOOD_SCHEDULE = {
    'sigma0': 1e-4,
    'sigma1': 5.0,
    't_min': 1e-5,
}

SAMPLER_DEFAULTS = {
    'method': 'reflect-em',
    'steps': 1000,
    'snr': 0.03,
    'gbar_scale': 1.0,
    'percentile': 0.995,
    'eps_max': 1.0,
    'ode_solver': 'rk4',
    'atol': 1e-5,
    'rtol': 1e-5,
    'n_samples': 10000,
}

TRAIN_DEFAULTS = {
    'learning_rate': 2e-4,
    'batch_size': 256,
    'total_steps': 2000,
    'ema_rate': 0.9999,
    'width': 128,
    'depth': 4,
    'embedding_dim': 32,
    'beta1': 0.9,
    'beta2': 0.999,
    'adam_eps': 1e-8,
    'grad_clip': 1.0,
    'loss_smoothing': 0.99,
    'checkpoint_every': 500,
    'n_train': 10000,
    'n_val': 1000,
}

ELBO_DEFAULTS = {
    'n_mc': 64,
    'min_mc': 16,
    'prior_nodes': 256,
    'entropy_nodes': 400,
    'n_points': 1000,
}

THRESHOLDING_DEFAULTS = {
    'ladder': (50, 100, 200, 400, 800),
    'reference_steps': 3200,
    'n_samples': 10000,
}

GUIDANCE_DEFAULTS = {
    'weights': (0.0, 1.0, 4.0),
    'methods': ('reflect-em', 'ode'),
    'label': 1,
    'steps': 1000,
    'n_samples': 10000,
}

# CDF grid used for W1 against exact distributions
METRIC_DEFAULTS = {
    'cdf_nodes': 10000,
    'n_directions': 64,
}
