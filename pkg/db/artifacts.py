"""Atomic artifact writes: temp file in the target directory, then rename."""
import csv
import io
import logging
import os
import tempfile

log = logging.getLogger(__name__)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _format(value):
    if isinstance(value, float):
        return repr(float(value))
    return value


def write_bytes_atomic(path, data):
    directory = ensure_dir(os.path.dirname(os.path.abspath(path)))
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
        tmp = None
    except OSError as e:
        log.error("write_bytes_atomic error: %s | path: %s", e, path)
        raise
    finally:
        if tmp is not None and os.path.exists(tmp):
            os.remove(tmp)
    return path


def write_text_atomic(path, text):
    return write_bytes_atomic(path, text.encode('utf-8'))


def write_csv_atomic(path, header, rows):
    """Header row then one line per row; floats written with repr for exact round-trips."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(v) for v in row])
    return write_text_atomic(path, buf.getvalue())


def read_csv(path):
    """Rows as dicts keyed by the header."""
    try:
        with open(path, newline='', encoding='utf-8') as f:
            return list(csv.DictReader(f))
    except OSError as e:
        log.error("read_csv error: %s | path: %s", e, path)
        raise
