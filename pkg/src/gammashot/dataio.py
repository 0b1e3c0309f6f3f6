"""File formats: latent/point CSVs, NDJSON draw archives, and event ingestion.

All writers are atomic (temp file + rename) and deterministic: fixed column
order, shortest round-tripping float repr, sorted JSON keys. Serialized time
steps and cell indices are 1-based, matching the model convention; the header
comment on each CSV states the coordinate convention.
"""

import csv
import json
import os
from datetime import date

import numpy as np

from .errors import IngestionError, SchemaError
from .observe import PointSeries

__all__ = [
    "write_latent_csv",
    "read_latent_csv",
    "write_points_csv",
    "read_points_csv",
    "write_archive",
    "read_archive",
    "write_json",
    "write_table_csv",
    "ingest_events",
]

LATENT_HEADER = "# latent weights; t: 1-based month index, j: 1-based cell index (row-major cell centers, degrees)"
POINTS_HEADER = "# events; t: 1-based month index, x/y: location (degrees), z: 1-based allocated cell (empty if unallocated)"


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x):
    return repr(float(x))


def write_latent_csv(path, latent):
    latent = np.asarray(latent, dtype=float)
    lines = [LATENT_HEADER, "t,j,w"]
    for t in range(latent.shape[0]):
        for j in range(latent.shape[1]):
            lines.append(f"{t + 1},{j + 1},{_fmt(latent[t, j])}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_latent_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(line for line in fh if not line.startswith("#")):
            rows.append((int(rec["t"]), int(rec["j"]), float(rec["w"])))
    T = max(r[0] for r in rows)
    J = max(r[1] for r in rows)
    out = np.zeros((T, J))
    for t, j, w in rows:
        out[t - 1, j - 1] = w
    return out


def write_points_csv(path, series):
    lines = [POINTS_HEADER, "t,x,y,z"]
    for t in range(series.T):
        ev = series.events[t]
        al = series.alloc[t]
        for i in range(ev.shape[0]):
            z = "" if al is None else str(int(al[i]) + 1)
            lines.append(f"{t + 1},{_fmt(ev[i, 0])},{_fmt(ev[i, 1])},{z}")
    _atomic_write(path, "\n".join(lines) + "\n")


def read_points_csv(path, T=None):
    per_t = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(line for line in fh if not line.startswith("#")):
            t = int(rec["t"])
            z = rec.get("z", "")
            per_t.setdefault(t, []).append(
                (float(rec["x"]), float(rec["y"]), None if z in ("", None) else int(z) - 1)
            )
    T = T or (max(per_t) if per_t else 0)
    events, alloc = [], []
    for t in range(1, T + 1):
        rows = per_t.get(t, [])
        events.append(np.array([[r[0], r[1]] for r in rows]).reshape(-1, 2))
        zs = [r[2] for r in rows]
        alloc.append(None if (not zs or any(z is None for z in zs)) else np.array(zs, dtype=np.int64))
    return PointSeries(events=events, alloc=alloc)


def write_archive(path, records):
    text = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    _atomic_write(path, text)


def read_archive(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_table_csv(path, header_comment, columns, rows):
    """Generic plot-ready CSV with a convention comment and fixed formatting."""
    lines = [f"# {header_comment}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


REQUIRED_EVENT_COLUMNS = ("longitude", "latitude", "acq_date", "confidence")


def _month_offset(d, start_year, start_month):
    return (d.year - start_year) * 12 + (d.month - start_month)


def ingest_events(
    path,
    window,
    T,
    start_year,
    start_month=1,
    confidence_range=(80.0, 100.0),
):
    """Read a fire-archive style CSV into a monthly-binned PointSeries.

    Rows are kept when the location falls inside `window`, the detection
    confidence lies in `confidence_range`, and the acquisition date falls in
    the T calendar months starting at (start_year, start_month). Malformed
    rows are counted and reported; more than 10% of them is an ingestion
    error. Returns (PointSeries, report dict).
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file without header")
        missing = [c for c in REQUIRED_EVENT_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing required columns {missing}")
        events = [[] for _ in range(T)]
        report = {
            "rows": 0,
            "kept": 0,
            "malformed": 0,
            "outside_window": 0,
            "outside_confidence": 0,
            "outside_dates": 0,
        }
        for rec in reader:
            report["rows"] += 1
            try:
                lon = float(rec["longitude"])
                lat = float(rec["latitude"])
                conf = float(rec["confidence"])
                day = date.fromisoformat(rec["acq_date"].strip())
                if not (np.isfinite(lon) and np.isfinite(lat)) or not 0.0 <= conf <= 100.0:
                    raise ValueError
            except (ValueError, TypeError):
                report["malformed"] += 1
                continue
            if not confidence_range[0] <= conf <= confidence_range[1]:
                report["outside_confidence"] += 1
                continue
            if not (window.x0 <= lon <= window.x1 and window.y0 <= lat <= window.y1):
                report["outside_window"] += 1
                continue
            k = _month_offset(day, start_year, start_month)
            if not 0 <= k < T:
                report["outside_dates"] += 1
                continue
            events[k].append((lon, lat))
            report["kept"] += 1
    if report["rows"] and report["malformed"] > 0.1 * report["rows"]:
        raise IngestionError(
            f"{path}: {report['malformed']} of {report['rows']} rows malformed (> 10%)"
        )
    series = PointSeries(
        events=[np.array(e).reshape(-1, 2) for e in events], alloc=[None] * T
    )
    return series, report
