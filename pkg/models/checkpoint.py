"""Versioned binary checkpoints.

Layout (little-endian):
  4 bytes   magic b'RDCK'
  uint32    format version
  uint32    header length in bytes
  header    UTF-8 JSON (domain, network shape, schedule, step, seed, blocks)
  payload   '<f8' arrays: params, EMA params, Adam m, Adam v; each section
            lists the blocks in declaration order
"""
import json
import logging
import os
import struct

import numpy as np

from db.artifacts import write_bytes_atomic
from engine.errors import MissingArtifactError
from engine.geometry import parse_domain
from engine.network import ScoreNetwork
from engine.schedule import NoiseSchedule
from engine.training import TrainState

log = logging.getLogger(__name__)

MAGIC = b'RDCK'
VERSION = 1
SECTIONS = ('params', 'ema_params', 'adam_m', 'adam_v')


def save_checkpoint(path, network, state, schedule, domain, seed):
    blocks = [[name, list(shape)] for name, shape in network.param_shapes().items()]
    header = {
        'version': VERSION,
        'domain': str(domain),
        'network': network.shape_dict(),
        'schedule': schedule.as_dict(),
        'step': int(state.step),
        'seed': int(seed),
        'smoothed_loss': None if np.isnan(state.smoothed_loss) else float(state.smoothed_loss),
        'sections': list(SECTIONS),
        'blocks': blocks,
    }
    head = json.dumps(header, sort_keys=True).encode('utf-8')
    parts = [MAGIC, struct.pack('<II', VERSION, len(head)), head]
    for section in SECTIONS:
        arrays = getattr(state, section)
        for name, _ in blocks:
            parts.append(np.ascontiguousarray(arrays[name], dtype='<f8').tobytes())
    write_bytes_atomic(path, b''.join(parts))
    log.info('checkpoint saved: %s (step %d)', path, state.step)
    return path


def load_checkpoint(path):
    """Return dict(network, state, schedule, domain, seed, header)."""
    if not os.path.exists(path):
        raise MissingArtifactError(f'checkpoint not found: {path}')
    with open(path, 'rb') as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f'{path} is not a refldiff checkpoint')
    version, head_len = struct.unpack_from('<II', data, 4)
    if version != VERSION:
        raise ValueError(f'unsupported checkpoint version {version}')
    header = json.loads(data[12:12 + head_len].decode('utf-8'))
    offset = 12 + head_len
    sections = {}
    for section in header['sections']:
        arrays = {}
        for name, shape in header['blocks']:
            count = int(np.prod(shape)) if shape else 1
            arrays[name] = np.frombuffer(data, dtype='<f8', count=count, offset=offset) \
                .astype(np.float64).reshape(shape)
            offset += 8 * count
        sections[section] = arrays
    if offset != len(data):
        raise ValueError(f'{path}: trailing or missing payload bytes')
    smoothed = header.get('smoothed_loss')
    state = TrainState(
        params=sections['params'], ema_params=sections['ema_params'],
        adam_m=sections['adam_m'], adam_v=sections['adam_v'],
        step=int(header['step']),
        smoothed_loss=float('nan') if smoothed is None else float(smoothed),
    )
    return {
        'network': ScoreNetwork(**header['network']),
        'state': state,
        'schedule': NoiseSchedule(**header['schedule']),
        'domain': parse_domain(header['domain']),
        'seed': int(header['seed']),
        'header': header,
    }
