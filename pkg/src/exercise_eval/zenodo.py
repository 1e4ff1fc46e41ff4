"""Adapter for the public IMU exercise deposit (Zenodo record 5052756).

The deposit's layout could not be inspected from the build environment, so
this adapter is written against the NGIMU export conventions and a
configurable directory pattern. Assumed layout::

    <root>/<volunteer>/<series>/<imu files>.csv

where ``<series>`` names the exercise code and performance, e.g.
``KFL_C_1`` or ``SQZ-wrong-2``, and each series directory holds four
``sensors.csv``-style files (one per IMU, sorted by file name to assign
slots 1..4). A flat variant ``<root>/<volunteer>/<series>_<imu>.csv`` is
also accepted. Columns are matched by name, case-insensitively::

    Time (s) | Gyroscope X (deg/s) ... | Accelerometer X (g) ...

Magnetometer, barometer and any other columns are ignored. Series of one
volunteer are concatenated into a single session timeline in file-name
order; timestamps are re-based so they stay strictly increasing.
"""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from pathlib import Path

import numpy as np

from .dataset import (
    N_IMUS,
    NOMINAL_RATE_HZ,
    ExerciseSeries,
    SensorStream,
    SessionRecording,
    check_loaded,
    ingest_label,
)
from .errors import DatasetFormatError, MissingStream

SERIES_PATTERN = re.compile(
    r"(?P<exercise>KFL|KFR|SQT|HAL|HAR|GAT|GHT|SQZ|EFE|EAH)[ _\-]*"
    r"(?P<performance>correct|wrong|C|W)(?![a-z])",
    re.IGNORECASE,
)

_COLUMN_KEYS = {
    "t": ("time",),
    "gx": ("gyroscope x", "gyro x", "gyr_x", "gx"),
    "gy": ("gyroscope y", "gyro y", "gyr_y", "gy"),
    "gz": ("gyroscope z", "gyro z", "gyr_z", "gz"),
    "ax": ("accelerometer x", "accel x", "acc_x", "ax"),
    "ay": ("accelerometer y", "accel y", "acc_y", "ay"),
    "az": ("accelerometer z", "accel z", "acc_z", "az"),
}


def _map_columns(header: list[str], path: Path) -> list[int]:
    lowered = [h.strip().lower() for h in header]
    idx = []
    for name, keys in _COLUMN_KEYS.items():
        # two-letter keys ("gx") must match exactly; longer ones match as prefixes
        hit = next((i for i, h in enumerate(lowered)
                    if any(h == k if len(k) <= 2 else h.startswith(k) for k in keys)), None)
        if hit is None:
            raise DatasetFormatError(f"{path}: no column for {name!r} in header {header}")
        idx.append(hit)
    return idx


def read_ngimu_csv(path: Path) -> np.ndarray:
    """Return a ``(n, 7)`` array t, gx, gy, gz, ax, ay, az from one export file."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise DatasetFormatError(f"{path}: empty file")
    cols = _map_columns(header, path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, usecols=cols, dtype=float)
    return data


def _parse_series_name(name: str) -> tuple[str, str]:
    m = SERIES_PATTERN.search(name)
    if m is None:
        raise DatasetFormatError(f"cannot parse exercise/performance from {name!r}")
    perf = m.group("performance").upper()
    perf = {"CORRECT": "C", "WRONG": "W"}.get(perf, perf)
    return m.group("exercise").upper(), perf


def _series_groups(vdir: Path) -> dict[str, list[Path]]:
    groups: dict[str, list[Path]] = defaultdict(list)
    for entry in sorted(vdir.iterdir()):
        if entry.is_dir():
            groups[entry.name] = sorted(entry.glob("*.csv"))
        elif entry.suffix.lower() == ".csv":
            # flat layout: <series>_<imu>.csv
            stem = entry.stem
            key = stem.rsplit("_", 1)[0] if "_" in stem else stem
            groups[key].append(entry)
    return dict(groups)


def load_zenodo_volunteer(vdir: Path) -> SessionRecording:
    groups = _series_groups(vdir)
    if not groups:
        raise DatasetFormatError(f"{vdir}: no series found")
    per_slot: list[list[np.ndarray]] = [[] for _ in range(N_IMUS)]
    series = []
    cursor = 0
    for name in sorted(groups):
        files = sorted(groups[name])
        if len(files) < N_IMUS:
            raise MissingStream(f"{vdir.name}/{name}: {len(files)} of {N_IMUS} IMU files")
        arrays = [read_ngimu_csv(p) for p in files[:N_IMUS]]
        n = min(len(a) for a in arrays)
        if n == 0:
            continue
        ex, perf = ingest_label(*_parse_series_name(name))
        for slot, arr in enumerate(arrays):
            per_slot[slot].append(arr[:n])
        series.append(ExerciseSeries(ex, perf, cursor, cursor + n))
        cursor += n

    streams = []
    for slot, chunks in enumerate(per_slot, start=1):
        offset = 0.0
        t_parts = []
        for chunk in chunks:
            t = chunk[:, 0] - chunk[0, 0] + offset
            t_parts.append(t)
            offset = t[-1] + 1.0 / NOMINAL_RATE_HZ
        data = np.vstack(chunks)
        streams.append(
            SensorStream(slot=slot, t=np.concatenate(t_parts), gyro=data[:, 1:4], accel=data[:, 4:7],
                         placement=f"IMU{slot}")
        )
    rec = SessionRecording(volunteer_id=vdir.name, streams=tuple(streams), series=tuple(series))
    return check_loaded(rec, str(vdir))


def load_zenodo(root: Path) -> list[SessionRecording]:
    vdirs = sorted(p for p in Path(root).iterdir() if p.is_dir() and not p.name.startswith("."))
    return [load_zenodo_volunteer(v) for v in vdirs]
