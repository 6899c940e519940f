"""Guided scores for labelled toy targets.

  classifier-free:  (w + 1) s(x | c) - w s(x)      targets q(c|x)^w q(x|c)
  classifier:       s(x) + w grad log q(c|x)       targets q(c|x)^w q(x)

so classifier guidance at weight w + 1 coincides with classifier-free
guidance at weight w. Linear combinations of Neumann scores stay Neumann.
"""
import numpy as np

from engine.kernel import DEFAULT_KERNEL
from engine.schedule import NoiseSchedule
from engine.score import ExactScore, ScoreFunction, cdf_from_density, class_posterior, toy_log_density


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f'dimension mismatch: {a.shape} vs {b.shape}')
    return a, b


def compose_cfg(s_cond, s_uncond, w):
    s_cond, s_uncond = _same_shape(s_cond, s_uncond)
    return (w + 1.0) * s_cond - w * s_uncond


def compose_classifier(s, grad_log_classifier, w):
    s, grad_log_classifier = _same_shape(s, grad_log_classifier)
    return w * grad_log_classifier + s


class BayesClassifierGradient:
    """grad_x log q_t(c | x) of the labelled mixture, as s(x | c) - s(x)."""

    def __init__(self, toy, label, schedule=None, kernel=DEFAULT_KERNEL):
        self.conditional = ExactScore(toy.conditional(label), schedule, kernel)
        self.unconditional = ExactScore(toy, schedule, kernel)

    def __call__(self, x, t):
        return self.conditional(x, t) - self.unconditional(x, t)


class GuidedScore(ScoreFunction):
    """A ScoreFunction built from a guidance rule, usable by every sampler.

    mode 'cfg' combines `conditional` and `unconditional`; mode 'classifier'
    adds w times `classifier_grad` to `unconditional`.
    """

    def __init__(self, unconditional, w, conditional=None, classifier_grad=None, mode='cfg'):
        if mode == 'cfg' and conditional is None:
            raise ValueError('cfg guidance needs a conditional score')
        if mode == 'classifier' and classifier_grad is None:
            raise ValueError('classifier guidance needs a classifier gradient')
        if mode not in ('cfg', 'classifier'):
            raise ValueError(f'unknown guidance mode {mode!r}')
        self.unconditional = unconditional
        self.conditional = conditional
        self.classifier_grad = classifier_grad
        self.w = float(w)
        self.mode = mode
        self.dim = unconditional.dim

    def evaluate(self, x, t):
        s = self.unconditional(x, t)
        if self.mode == 'cfg':
            return compose_cfg(self.conditional(x, t), s, self.w)
        return compose_classifier(s, self.classifier_grad(x, t), self.w)


def exact_guided_score(toy, label, w, schedule=None, mode='cfg', kernel=DEFAULT_KERNEL):
    """Guided score from the closed-form toy; classifier mode uses weight w + 1."""
    schedule = schedule or NoiseSchedule()
    uncond = ExactScore(toy, schedule, kernel)
    if mode == 'cfg':
        return GuidedScore(uncond, w, conditional=ExactScore(toy.conditional(label), schedule, kernel))
    return GuidedScore(uncond, w + 1.0, classifier_grad=BayesClassifierGradient(toy, label, schedule, kernel),
                       mode='classifier')


def tilted_log_density(toy, label, w, x, t, schedule=None, kernel=DEFAULT_KERNEL):
    """Unnormalized w log q_t(c|x) + log q_t(x|c)."""
    schedule = schedule or NoiseSchedule()
    post = class_posterior(toy, label, x, t, schedule, kernel)
    with np.errstate(divide='ignore'):
        return w * np.log(post) + toy_log_density(toy.conditional(label), x, t, schedule, kernel)


def tilted_cdf_1d(toy, label, w, t, schedule=None, n_nodes=10000, kernel=DEFAULT_KERNEL):
    """Quadrature-normalized CDF of the tilted target on [0, 1]."""
    if toy.dim != 1:
        raise ValueError('tilted_cdf_1d needs a 1D toy')
    grid = np.linspace(0.0, 1.0, int(n_nodes))
    logd = tilted_log_density(toy, label, w, grid[:, None], t, schedule, kernel)
    return cdf_from_density(grid, np.exp(logd - logd.max()))
