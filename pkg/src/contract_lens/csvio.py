"""CSV output helpers: every file starts with one ``#`` metadata comment line."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__


def config_hash(config) -> str:
    """Short stable hash of a JSON-serialisable configuration."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def metadata_line(seed=None, config=None, **extra) -> str:
    parts = [f"contract_lens={__version__}", f"seed={seed if seed is not None else 'none'}",
             f"config_hash={config_hash(config) if config is not None else 'none'}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts)


def fmt(value) -> str:
    """Cell formatting: infinities as ``inf``, missing as empty, floats round-trip."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def render(header: Sequence[str], rows: Iterable[Sequence], meta: str) -> str:
    buf = io.StringIO()
    buf.write(meta + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], meta: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(header, rows, meta))
    return path


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Read a CSV written by :func:`write_csv` (or a plain CSV); returns (comments, rows)."""
    lines = Path(path).read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    return comments, list(csv.DictReader(body))
