"""File formats: DNLS checkpoints, diagnostics CSV, key = value reports,
run manifests."""
from __future__ import annotations

import csv
import json
import math
import platform
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagnosticsRecord
from .grid import Field, Grid

MAGIC = b"DNLS"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


class FormatError(ValueError):
    pass


def write_checkpoint(path: str | Path, f: Field) -> None:
    """Header ``DNLS``, u32 version, u32 dim, u32 points, f64 half_length,
    f64 time, then little-endian f64 (re, im) pairs in row-major order."""
    g = f.grid
    header = _HEADER.pack(MAGIC, VERSION, g.dim, g.points, g.half_length, f.time)
    data = np.ascontiguousarray(f.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_checkpoint(path: str | Path) -> Field:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, dim, points, half_length, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    grid = Grid(dim, points, half_length)
    expected = _HEADER.size + 16 * points**dim
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(grid.shape)
    return Field(grid, values.astype(complex), t)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_diagnostics_csv(path: str | Path, series: Iterable[DiagnosticsRecord]) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in series:
            w.writerow([_fmt(v) for v in rec.csv_row()])
            n += 1
    return n


def read_diagnostics_csv(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise FormatError(f"{path}: header does not match the diagnostics schema")
    return [DiagnosticsRecord.from_row(r) for r in rows[1:] if r]


def read_columns(path: str | Path, required: Sequence[str]) -> dict[str, np.ndarray]:
    """Read a headed numeric CSV and return the requested columns."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise FormatError(f"{path}: missing columns {missing}")
        data = {c: [] for c in required}
        for row in reader:
            for c in required:
                data[c].append(float(row[c]))
    return {c: np.asarray(v) for c, v in data.items()}


def write_matrix_csv(path: str | Path, times: Sequence[float], matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [_fmt(t) for t in times])
        for t, row in zip(times, matrix):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt(v) if math.isfinite(v) else str(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ", ".join(format_value(x) for x in v)
    return str(v)


def write_report(path: str | Path, sections: Mapping[str, Mapping[str, object]]) -> None:
    """Write ``[section]`` blocks of ``key = value`` lines."""
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {format_value(v)}" for k, v in items.items())
        lines.append("")
    Path(path).write_text("\n".join(lines))


def read_report(path: str | Path) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    section = out.setdefault("", {})
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = out.setdefault(line[1:-1], {})
            continue
        key, _, val = line.partition("=")
        section[key.strip()] = val.strip()
    if not out[""]:
        del out[""]
    return out


def versions() -> dict[str, str]:
    import matplotlib
    import scipy

    from . import __version__

    return {
        "dnls": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_manifest(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
