"""Run configuration: line-oriented `section.key = value` text.

Blank lines and `#` comments are ignored. Every key must appear in SCHEMA;
values are parsed by the type of their default (bool, int, float, str, or a
comma-separated tuple). The resolved form lists every key, sorted, so a run
can be repeated from it alone.
"""
import logging
import os

from config import settings
from config.settings import (
    ELBO_DEFAULTS, GUIDANCE_DEFAULTS, KERNEL_DEFAULTS, SAMPLER_DEFAULTS,
    SCHEDULE_DEFAULTS, THRESHOLDING_DEFAULTS, TRAIN_DEFAULTS,
)
from db.artifacts import write_text_atomic
from engine.errors import ConfigError, MissingArtifactError

log = logging.getLogger(__name__)


def _schema():
    return {
        'run': {'seed': 0, 'output_dir': settings.OUTPUT_DIR, 'plot': False},
        'domain': {'kind': 'interval'},
        'data': {'name': '1d-two-bump', 'dim': 1, 'n_points': ELBO_DEFAULTS['n_points'],
                 'concentration': 1.0, 'n_train': TRAIN_DEFAULTS['n_train'],
                 'n_val': TRAIN_DEFAULTS['n_val']},
        'schedule': dict(SCHEDULE_DEFAULTS),
        'kernel': dict(KERNEL_DEFAULTS),
        'sampler': dict(SAMPLER_DEFAULTS, score='exact', checkpoint=''),
        'train': dict(TRAIN_DEFAULTS, resume=''),
        'elbo': dict(ELBO_DEFAULTS, model='exact', checkpoint='', perturbation=0.0),
        'thresholding': dict(THRESHOLDING_DEFAULTS),
        'guidance': dict(GUIDANCE_DEFAULTS, mode='cfg', data='1d-two-class'),
    }


SCHEMA = _schema()


def _parse_value(raw, default, where):
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered not in ('true', 'false', '1', '0', 'yes', 'no'):
                raise ValueError(text)
            return lowered in ('true', '1', 'yes')
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else str
            items = [s.strip() for s in text.split(',') if s.strip()]
            return tuple(kind(s) for s in items)
        return text
    except ValueError:
        raise ConfigError(f'{where}: cannot parse {text!r} as {type(default).__name__}') from None


def _format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


class RunConfig:
    """Resolved settings for one command."""

    def __init__(self, values=None):
        self.values = {section: dict(keys) for section, keys in _schema().items()}
        for section, keys in (values or {}).items():
            for key, value in keys.items():
                self.set(section, key, value)

    @classmethod
    def from_text(cls, text, source='<config>'):
        cfg = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            where = f'{source}:{lineno}'
            if '=' not in line:
                raise ConfigError(f'{where}: expected "section.key = value", got {line!r}')
            name, raw = line.split('=', 1)
            section, dot, key = name.strip().partition('.')
            if not dot or not key:
                raise ConfigError(f'{where}: key {name.strip()!r} must look like section.key')
            cfg._check_key(section, key, where)
            cfg.values[section][key] = _parse_value(raw, SCHEMA[section][key], where)
        return cfg

    @classmethod
    def from_file(cls, path):
        if not os.path.exists(path):
            raise MissingArtifactError(f'config file not found: {path}')
        with open(path, encoding='utf-8') as f:
            return cls.from_text(f.read(), source=path)

    def _check_key(self, section, key, where='config'):
        if section not in SCHEMA:
            raise ConfigError(f'{where}: unknown section {section!r}')
        if key not in SCHEMA[section]:
            raise ConfigError(f'{where}: unknown key {section}.{key}')

    def set(self, section, key, value):
        self._check_key(section, key)
        default = SCHEMA[section][key]
        if isinstance(value, str) and not isinstance(default, str):
            value = _parse_value(value, default, f'{section}.{key}')
        self.values[section][key] = value

    def get(self, section, key):
        self._check_key(section, key)
        return self.values[section][key]

    def section(self, name):
        if name not in self.values:
            raise ConfigError(f'unknown section {name!r}')
        return dict(self.values[name])

    @property
    def seed(self):
        return int(self.values['run']['seed'])

    @property
    def output_dir(self):
        return self.values['run']['output_dir']

    def with_overrides(self, seed=None, output_dir=None):
        if seed is not None:
            self.values['run']['seed'] = int(seed)
        if output_dir is not None:
            self.values['run']['output_dir'] = output_dir
        return self

    def resolved_text(self):
        lines = []
        for section in sorted(self.values):
            for key in sorted(self.values[section]):
                lines.append(f'{section}.{key} = {_format_value(self.values[section][key])}')
        return '\n'.join(lines) + '\n'

    def write_resolved(self, directory):
        path = os.path.join(directory, 'resolved_config.txt')
        write_text_atomic(path, self.resolved_text())
        log.info('resolved config written to %s', path)
        return path
