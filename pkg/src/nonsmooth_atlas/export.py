"""Plot-ready CSV and JSON artifacts.

Every artifact starts with a header recording the invocation and tolerance
settings.  CSV headers are ``#`` comment lines; JSON documents carry them
under the ``"_header"`` key.  Files are written to a temporary sibling and
renamed into place, so a failed run never leaves a partial artifact.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__


def make_header(argv: Optional[Sequence[str]] = None, **settings) -> dict:
    """Header dictionary: package version, invocation and any settings given."""
    h = {"package": "nonsmooth_atlas", "version": __version__}
    if argv is not None:
        h["invocation"] = " ".join(str(a) for a in argv)
    h.update({k: _jsonable(v) for k, v in settings.items()})
    return h


def fmt(v) -> str:
    """Full double precision for reals; plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return format(f, ".17g")
    if hasattr(v, "value") and not isinstance(v, str):
        return str(v.value)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if hasattr(v, "to_dict"):
        return _jsonable(v.to_dict())
    if hasattr(v, "value") and not isinstance(v, (str, int, float, bool)):
        return v.value
    return v


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], header: Optional[dict] = None) -> str:
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {json.dumps(_jsonable(v))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def json_text(obj, header: Optional[dict] = None) -> str:
    doc = {"_header": header or {}}
    body = _jsonable(obj)
    if isinstance(body, dict):
        doc.update(body)
    else:
        doc["data"] = body
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and an atomic rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence], header: Optional[dict] = None) -> None:
    atomic_write(path, csv_text(columns, list(rows), header))


def write_json(path: str, obj, header: Optional[dict] = None) -> None:
    atomic_write(path, json_text(obj, header))


def read_csv(path_or_text: str) -> tuple:
    """``(header, columns, rows)`` from a CSV artifact (path or text)."""
    text = path_or_text
    if "\n" not in text and os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            header[k] = json.loads(v)
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    return header, rows[0], rows[1:]


# table builders

TRAJECTORY_COLUMNS = ("t", "x1", "x2", "x3", "regime")
EVENT_COLUMNS = ("t", "kind", "x1", "x2", "x3")


def trajectory_rows(traj) -> list:
    rows = []
    for seg in traj.segments:
        for t, x in zip(seg.times, seg.states):
            rows.append((float(t), float(x[0]), float(x[1]), float(x[2]), seg.regime.value))
    return rows


def event_rows(traj) -> list:
    return [(float(e.time), e.kind.value if e.section is None else f"{e.kind.value}:{e.section}",
             float(e.state[0]), float(e.state[1]), float(e.state[2])) for e in traj.events]


GS_COLUMNS = ("nu", "eta_gs", "tau_L", "tau_R", "delta_R")
CURVE_COLUMNS = ("param1", "param2", "kind", "residual", "markers")
SCAN_COLUMNS = ("tau_L", "tau_R", "kind_code", "n_components", "n_segments", "undecided")
BOUNDARY_COLUMNS = ("kind", "fixed_coord", "solved_coord")
ORBIT_COLUMNS = ("path_index", "x_value")

