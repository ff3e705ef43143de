"""JSON and CSV persistence.

JSON is written with sorted keys and fixed indentation so that identical
inputs give byte-identical files.  ``"-"`` as a path means standard output.
"""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ValidationError
from .profiles import Profile

__all__ = [
    "version_tags",
    "dumps",
    "write_json",
    "read_json",
    "write_csv",
    "read_csv",
    "save_profile",
    "load_profile",
    "spectrum_report",
    "series_table",
    "snapshot_rows",
]

CSV_FORMAT = "%.17g"


def version_tags():
    return {"package": "sigmaspec", "version": __version__, "numpy": np.__version__}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj):
    text = dumps(obj)
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def write_csv(path, header, rows):
    """Write ``rows`` (2-d array) under ``header`` with full float precision."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(header):
        raise ValidationError(f"{len(header)} columns in header, {rows.shape[1]} in data")
    stream = sys.stdout if str(path) == "-" else open(path, "w", newline="")
    try:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([CSV_FORMAT % x for x in r])
    finally:
        if stream is not sys.stdout:
            stream.close()


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(x) for x in row] for row in r])
    return header, data.reshape(-1, len(header))


def save_profile(path, profile, extra=None):
    doc = profile.to_dict()
    if extra:
        doc.update(extra)
    return write_json(path, doc)


def load_profile(path):
    return Profile.from_dict(read_json(path))


def spectrum_report(estimates, profile_index, method, config):
    """``{profile_n, method, levels: [...], config, versions}``."""
    levels = []
    for k, e in enumerate(estimates):
        entry = {"level": e.level if e.level is not None else k, "mu": e.value,
                 "uncertainty": e.uncertainty, "oscillation": e.oscillation}
        entry.update({key: v for key, v in e.details.items() if key != "floor"})
        entry.setdefault("window", None)
        levels.append(entry)
    return {"profile_n": profile_index, "method": method, "levels": levels,
            "config": config, "versions": version_tags()}


def series_table(bank):
    """Header and rows ``(tau, Lambda_0 .. Lambda_m)`` of a filter bank."""
    return bank.to_csv_rows()


def snapshot_rows(states):
    """Rows ``(tau, rho, u1, u2, u3)`` for a sequence of states."""
    header = ["tau", "rho", "u1", "u2", "u3"]
    blocks = []
    for s in states:
        rho = s.grid.rho
        blocks.append(np.column_stack([np.full(rho.size, s.tau), rho, s.u.T]))
    return header, (np.vstack(blocks) if blocks else np.empty((0, 5)))
