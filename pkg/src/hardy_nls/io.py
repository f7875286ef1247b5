"""Plain-text input and output: CSV profiles, key = value configs, summaries.

Every file written here starts with ``#`` header lines naming the package
version, the model parameters and the tolerances, followed by CSV data.
Floats are written with ``repr``, the shortest decimal that reads back to the
same double, so a write/read round trip is exact and output is deterministic.
"""
from __future__ import annotations

import csv
import io as _io
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .errors import MalformedCsv, NonMonotoneGrid
from .params import ModelParams
from .profile import RadialGrid, RadialProfile


def fmt(x) -> str:
    """Shortest round-trip text for a number (ints stay ints)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def header_lines(params: Optional[ModelParams] = None, extra: Optional[Mapping] = None) -> List[str]:
    lines = [f"# hardy_nls {__version__}"]
    if params is not None:
        for k, v in params.header().items():
            lines.append(f"# {k} = {fmt(v)}")
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {fmt(v)}")
    return lines


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], params=None, extra=None) -> None:
    buf = _io.StringIO()
    for line in header_lines(params, extra):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    Path(path).write_text(buf.getvalue())


def format_summary(values: Mapping, params=None, extra=None) -> str:
    lines = header_lines(params, extra)
    for k, v in values.items():
        lines.append(f"{k}: {fmt(v)}")
    return "\n".join(lines) + "\n"


def read_csv(path) -> tuple:
    """Return ``(header_dict, column_names, rows_as_float_array)``; ``#`` lines form the header."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MalformedCsv(f"cannot read {path}: {exc}") from exc
    meta: Dict[str, str] = {}
    data_lines = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        data_lines.append(s)
    if not data_lines:
        raise MalformedCsv(f"{path}: no column header")
    reader = csv.reader(data_lines)
    cols = [c.strip() for c in next(reader)]
    rows = []
    for i, rec in enumerate(reader, start=2):
        if len(rec) != len(cols):
            raise MalformedCsv(f"{path}: row {i} has {len(rec)} fields, expected {len(cols)}")
        try:
            rows.append([float(x) for x in rec])
        except ValueError as exc:
            raise MalformedCsv(f"{path}: row {i}: {exc}") from exc
    arr = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    return meta, cols, arr


def parse_profile_csv(path, d: Optional[int] = None) -> RadialProfile:
    """Read an ``r,re[,im]`` file into a profile.

    ``d`` defaults to the ``d`` recorded in the file header.
    """
    meta, cols, arr = read_csv(path)
    if len(cols) < 2 or cols[0] != "r" or cols[1] != "re" or (len(cols) > 2 and cols[2] != "im") or len(cols) > 3:
        raise MalformedCsv(f"{path}: expected columns r,re[,im], got {','.join(cols)}")
    if arr.shape[0] < 2:
        raise MalformedCsv(f"{path}: need at least two rows")
    r = arr[:, 0]
    if np.any(np.diff(r) <= 0):
        raise NonMonotoneGrid(f"{path}: r must be strictly increasing")
    if np.any(r <= 0):
        raise NonMonotoneGrid(f"{path}: r must be positive")
    vals = arr[:, 1] + 1j * arr[:, 2] if len(cols) == 3 else arr[:, 1]
    if d is None:
        if "d" not in meta:
            raise MalformedCsv(f"{path}: dimension not given and not in header")
        d = int(meta["d"])
    return RadialProfile(RadialGrid.from_nodes(r), vals, d)


def write_profile_csv(path, profile: RadialProfile, params=None, extra=None) -> None:
    vals = np.asarray(profile.values)
    rows = zip(profile.r, np.real(vals), np.imag(vals) if np.iscomplexobj(vals) else np.zeros_like(profile.r))
    write_csv(path, ["r", "re", "im"], rows, params, extra)


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; later keys override earlier ones."""
    out: Dict[str, str] = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected key = value, got {raw.strip()!r}")
        k, v = line.split("=", 1)
        k = k.strip().lower().replace("-", "_")
        if not k:
            raise ConfigError(f"line {i}: empty key")
        out[k] = v.strip()
    return out


def load_config(path) -> Dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
