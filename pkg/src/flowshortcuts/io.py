"""CSV artifacts and run manifests.

CSV files are UTF-8 with LF line endings: optional ``# key: value``
metadata lines, one header row naming the columns, then rows formatted
with 12 significant digits.  All files are written atomically (temporary
file plus rename) so a crashed run never leaves a truncated artifact.
"""

from __future__ import annotations

import io as _io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

OUTPUT_ENV = "FLOWSHORTCUTS_OUTPUT_DIR"
FLOAT_FORMAT = "%.12g"


def output_dir(explicit=None) -> Path:
    """Explicit path, else ``$FLOWSHORTCUTS_OUTPUT_DIR``, else ``./results``."""
    path = Path(explicit or os.environ.get(OUTPUT_ENV) or "results")
    path.mkdir(parents=True, exist_ok=True)
    return path


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_csv(columns: dict, metadata: dict | None = None) -> str:
    """Render equal-length columns as CSV text."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float).ravel() for n in names])
    buf = _io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}: {value}\n")
    buf.write(",".join(names) + "\n")
    np.savetxt(buf, data, fmt=FLOAT_FORMAT, delimiter=",", newline="\n")
    return buf.getvalue()


def write_csv(path, columns: dict, metadata: dict | None = None) -> Path:
    """Write columns (name -> 1-D array) atomically."""
    lengths = {np.asarray(v).size for v in columns.values()}
    if len(lengths) != 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    return atomic_write_text(path, format_csv(columns, metadata))


def read_csv(path):
    """Return ``(columns, metadata)`` from a file written by :func:`write_csv`."""
    meta, header, rows = {}, None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(x) for x in line.split(",")])
    data = np.array(rows).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}, meta


def long_table(times, q, values: dict) -> dict:
    """Flatten ``(n_times, n_q)`` fields into ``t, q, name...`` columns."""
    times = np.asarray(times, dtype=float)
    q = np.asarray(q, dtype=float)
    out = {"t": np.repeat(times, q.size), "q": np.tile(q, times.size)}
    for name, arr in values.items():
        out[name] = np.asarray(arr, dtype=float).reshape(times.size * q.size)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


@dataclass
class RunManifest:
    """Record of one run: config echo, version, timing, diagnostics, flags."""

    name: str
    config: dict
    version: str
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    acceptance: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    status: str = "ok"

    def to_dict(self) -> dict:
        return _jsonable({"name": self.name, "version": self.version, "status": self.status,
                          "wall_time_s": self.wall_time, "config": self.config,
                          "diagnostics": self.diagnostics, "acceptance": self.acceptance,
                          "outputs": self.outputs})

    def write(self, directory) -> Path:
        path = Path(directory) / f"{self.name}.manifest.json"
        return atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
