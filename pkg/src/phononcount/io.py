"""CSV and JSON readers/writers for traces, maps, histograms, sweeps and fit inputs.

Floats are written with ``repr`` so files round-trip exactly.  Readers raise
:class:`SchemaError` naming the file and line of the first problem.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .counting import Histogram
from .dynamics import OccupancyTrace
from .exceptions import ParameterError, SchemaError
from .fock import FockSweep
from .params import pulse_from_dict


def _fmt(value) -> str:
    if isinstance(value, (str, np.str_)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence], comments=()) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_table(path, required: Sequence[str], optional: Sequence[str] = (),
               text_columns: Sequence[str] = ()) -> tuple[dict[str, np.ndarray], list[str]]:
    """Read a CSV with ``#`` comment lines; returns ``(columns, comments)``.

    Numeric columns are parsed as float; ``text_columns`` are kept as str.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError:
        raise SchemaError(f"{path}: not a text file") from None
    comments, header, header_line, rows = [], None, 0, []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if header is None:
                comments.append(stripped[1:].strip())
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header, header_line = [f.strip() for f in fields], lineno
            continue
        rows.append((lineno, fields))
    if header is None:
        raise SchemaError(f"{path}: empty file (expected header {','.join(required)})")
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}:{header_line}: missing column(s) {', '.join(missing)}")
    unknown = [c for c in header if c not in required and c not in optional]
    if unknown:
        raise SchemaError(f"{path}:{header_line}: unexpected column(s) {', '.join(unknown)}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    cols: dict[str, list] = {c: [] for c in header}
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        for name, raw in zip(header, fields):
            if name in text_columns:
                cols[name].append(raw.strip())
                continue
            try:
                cols[name].append(float(raw))
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: column {name}: not a number: {raw!r}") from None
    out = {k: (np.array(v, dtype=str) if k in text_columns else np.array(v, dtype=float))
           for k, v in cols.items()}
    return out, comments


# ---------------------------------------------------------------- traces and maps

def write_trace_csv(path, trace: OccupancyTrace) -> Path:
    header = ["t_s", "n"]
    cols = [trace.times, trace.n]
    if trace.sigma is not None:
        header.append("sigma")
        cols.append(trace.sigma)
    if np.any(trace.segments != "on"):
        header.append("segment")
        cols.append(trace.segments)
    return _write_rows(path, header, zip(*cols))


def read_trace_csv(path) -> OccupancyTrace:
    cols, _ = read_table(path, ["t_s", "n"], ["sigma", "segment"], text_columns=["segment"])
    try:
        return OccupancyTrace(cols["t_s"], cols["n"], cols.get("segment"), cols.get("sigma"))
    except ParameterError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def write_map_csv(path, t_pers, t_pulses, values, name: str) -> Path:
    """Long-format map with rows ``(t_per_s, t_pulse_s, <name>)``; ``values[i, j]`` at ``t_pers[i]``."""
    values = np.asarray(values)
    rows = ((tp, tw, values[i, j]) for i, tp in enumerate(t_pers) for j, tw in enumerate(t_pulses))
    return _write_rows(path, ["t_per_s", "t_pulse_s", name], rows)


def write_sweep_csv(path, sweep: FockSweep) -> Path:
    rows = []
    for i, tp in enumerate(sweep.t_pulses):
        for j, tper in enumerate(sweep.t_pers):
            rows.append((tp, tper, sweep.fidelity[i, j], sweep.t_fock[i, j],
                         sweep.trace_defect[i, j], sweep.flag[i, j]))
    return _write_rows(path, ["t_pulse_s", "t_per_s", "fidelity", "t_fock_s", "trace_defect",
                              "validity_flag"], rows)


# ---------------------------------------------------------------- histograms

def write_histogram_csv(path, hist: Histogram) -> Path:
    comments = [f"integration_time_s={hist.integration_time!r}",
                f"pulse={json.dumps(hist.pulse.to_config(), sort_keys=True)}"]
    rows = zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts)
    return _write_rows(path, ["bin_start_s", "bin_end_s", "counts"], rows, comments)


def read_histogram_csv(path) -> Histogram:
    cols, comments = read_table(path, ["bin_start_s", "bin_end_s", "counts"])
    meta = {}
    for line in comments:
        key, sep, value = line.partition("=")
        if sep:
            meta[key.strip()] = value.strip()
    for key in ("integration_time_s", "pulse"):
        if key not in meta:
            raise SchemaError(f"{path}: header comment '# {key}=...' missing")
    try:
        integration_time = float(meta["integration_time_s"])
        pulse = pulse_from_dict(json.loads(meta["pulse"]))
    except (ValueError, ParameterError) as exc:
        raise SchemaError(f"{path}: bad header metadata: {exc}") from None
    start, end = cols["bin_start_s"], cols["bin_end_s"]
    if start.size > 1 and not np.array_equal(start[1:], end[:-1]):
        raise SchemaError(f"{path}: bins must be contiguous")
    counts = cols["counts"]
    if np.all(counts == np.round(counts)):
        counts = counts.astype(np.int64)
    try:
        return Histogram(np.append(start, end[-1]), counts, integration_time, pulse)
    except ParameterError as exc:
        raise SchemaError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- fit inputs

#: Column layout of the fit-input CSVs, by fit kind: (required, optional).
POINT_SCHEMAS = {
    "decay": (["t_per_s", "ratio"], ["sigma"]),
    "pulse": (["t_s", "n"], ["sigma", "segment"]),
    "cw": (["n_c", "value"], ["sigma"]),
    "g0": (["n_c", "linewidth_red_rad_s", "linewidth_blue_rad_s"], []),
}


def read_points_csv(path, kind: str) -> dict[str, np.ndarray]:
    if kind not in POINT_SCHEMAS:
        raise ValueError(f"unknown fit kind {kind!r}")
    required, optional = POINT_SCHEMAS[kind]
    cols, _ = read_table(path, required, optional, text_columns=["segment"])
    return cols


def write_points_csv(path, kind: str, columns: dict[str, Sequence]) -> Path:
    required, optional = POINT_SCHEMAS[kind]
    header = list(required) + [c for c in optional if c in columns]
    return _write_rows(path, header, zip(*(columns[c] for c in header)))


def write_json(path, payload) -> Path:
    path = Path(path)
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False,
                      default=lambda o: o.item() if hasattr(o, "item") else str(o))
    path.write_text(text + "\n", encoding="utf-8")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
