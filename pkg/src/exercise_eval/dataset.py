"""Canonical data model for four-IMU exercise sessions.

A session holds four synchronized sensor streams (gyroscope in deg/s,
accelerometer in g, sampled at a nominal 100 Hz) plus the manually labeled
boundaries of every exercise series. Series indices refer to the common
sample timeline shared by the four streams.

On disk a dataset is one directory per volunteer::

    <root>/<volunteer_id>/imu1.csv ... imu4.csv   header t,gx,gy,gz,ax,ay,az
    <root>/<volunteer_id>/labels.csv               header volunteer_id,exercise,performance,start_sample,end_sample
    <root>/<volunteer_id>/session.yaml             optional: placements, age/height/weight
"""

from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import yaml

from .errors import (
    DatasetFormatError,
    LabelOutOfBounds,
    MissingStream,
    RateAnomaly,
    SeriesNotInRecording,
)

NOMINAL_RATE_HZ = 100.0
RATE_TOLERANCE = 0.05
N_IMUS = 4
SIGNALS = ("gx", "gy", "gz", "ax", "ay", "az")
N_SIGNALS = N_IMUS * len(SIGNALS)
GYRO_RANGE_DPS = 2000.0
ACCEL_RANGE_G = 16.0

IMU_HEADER = ("t",) + SIGNALS
LABELS_HEADER = ("volunteer_id", "exercise", "performance", "start_sample", "end_sample")


class Exercise(str, Enum):
    KFL = "KFL"
    KFR = "KFR"
    SQT = "SQT"
    HAL = "HAL"
    HAR = "HAR"
    GAT = "GAT"
    GHT = "GHT"
    SQZ = "SQZ"
    EFE = "EFE"
    EAH = "EAH"

    @property
    def limb_group(self) -> "LimbGroup":
        return LimbGroup.UPPER if self in UPPER_LIMB_EXERCISES else LimbGroup.LOWER

    @property
    def has_wrong_variant(self) -> bool:
        return self is not Exercise.GHT


class LimbGroup(str, Enum):
    UPPER = "Upper"
    LOWER = "Lower"


class Performance(str, Enum):
    C = "C"
    W = "W"


UPPER_LIMB_EXERCISES = frozenset({Exercise.SQZ, Exercise.EFE, Exercise.EAH})
EXERCISES = tuple(Exercise)


class ImuSample(NamedTuple):
    t: float
    gyro: tuple[float, float, float]
    accel: tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class SensorStream:
    """One IMU slot. ``gyro`` and ``accel`` are ``(n, 3)`` arrays."""

    slot: int
    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    placement: str = ""
    nominal_rate: float = NOMINAL_RATE_HZ

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        gyro = np.asarray(self.gyro, dtype=float).reshape(-1, 3)
        accel = np.asarray(self.accel, dtype=float).reshape(-1, 3)
        if not (len(t) == len(gyro) == len(accel)):
            raise DatasetFormatError(
                f"IMU{self.slot}: column lengths differ ({len(t)}, {len(gyro)}, {len(accel)})"
            )
        for name, arr in (("t", t), ("gyro", gyro), ("accel", accel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SensorStream):
            return NotImplemented
        return (
            self.slot == other.slot
            and self.placement == other.placement
            and len(self) == len(other)
            and np.allclose(self.t, other.t, rtol=0.0, atol=1e-9)
            and np.array_equal(self.gyro, other.gyro)
            and np.array_equal(self.accel, other.accel)
        )

    def signals(self) -> np.ndarray:
        """``(n, 6)`` array in gx, gy, gz, ax, ay, az order."""
        return np.hstack([self.gyro, self.accel])

    def sample(self, i: int) -> ImuSample:
        return ImuSample(float(self.t[i]), tuple(self.gyro[i]), tuple(self.accel[i]))

    def samples(self) -> Iterator[ImuSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def observed_rate(self) -> float:
        if len(self) < 2:
            return float("nan")
        span = self.t[-1] - self.t[0]
        return (len(self) - 1) / span if span > 0 else float("inf")


@dataclass(frozen=True)
class ExerciseSeries:
    exercise: Exercise
    performance: Performance
    start_sample: int
    end_sample: int
    repetitions: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "exercise", Exercise(self.exercise))
        object.__setattr__(self, "performance", Performance(self.performance))
        object.__setattr__(self, "start_sample", int(self.start_sample))
        object.__setattr__(self, "end_sample", int(self.end_sample))

    def __len__(self) -> int:
        return self.end_sample - self.start_sample

    @property
    def tag(self) -> str:
        return f"{self.exercise.value}-{self.performance.value}[{self.start_sample}:{self.end_sample}]"


@dataclass(frozen=True, eq=False)
class SessionRecording:
    volunteer_id: str
    streams: tuple[SensorStream, ...]
    series: tuple[ExerciseSeries, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "volunteer_id", str(self.volunteer_id))
        object.__setattr__(self, "streams", tuple(sorted(self.streams, key=lambda s: s.slot)))
        object.__setattr__(self, "series", tuple(self.series))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SessionRecording):
            return NotImplemented
        return (
            self.volunteer_id == other.volunteer_id
            and self.streams == other.streams
            and self.series == other.series
            and self.meta == other.meta
        )

    @property
    def n_samples(self) -> int:
        return min((len(s) for s in self.streams), default=0)

    def signal_matrix(self) -> np.ndarray:
        """``(n_samples, 24)`` array, IMU-major then gx..az."""
        n = self.n_samples
        return np.hstack([s.signals()[:n] for s in self.streams])


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_recording(rec: SessionRecording) -> list[Violation]:
    """Return every invariant violation found in ``rec``; empty when valid."""
    out: list[Violation] = []
    if len(rec.streams) != N_IMUS:
        out.append(Violation("stream_count", f"expected {N_IMUS} streams, found {len(rec.streams)}"))
    slots = [s.slot for s in rec.streams]
    if len(set(slots)) != len(slots):
        out.append(Violation("stream_slots", f"duplicate IMU slots {slots}"))
    lengths = {len(s) for s in rec.streams}
    if len(lengths) > 1:
        out.append(Violation("stream_length", f"stream lengths differ: {sorted(lengths)}"))

    for s in rec.streams:
        name = f"IMU{s.slot}"
        if len(s) and s.t[0] < 0:
            out.append(Violation("timestamp", f"{name}: negative timestamp {s.t[0]}"))
        if len(s) > 1 and not np.all(np.diff(s.t) > 0):
            bad = int(np.argmin(np.diff(s.t) > 0)) + 1
            out.append(Violation("timestamp", f"{name}: timestamps not strictly increasing at sample {bad}"))
        rate = s.observed_rate()
        if np.isfinite(rate) and abs(rate - s.nominal_rate) > RATE_TOLERANCE * s.nominal_rate:
            out.append(Violation("rate", f"{name}: observed rate {rate:.3f} Hz vs nominal {s.nominal_rate:g} Hz"))
        if not (np.all(np.isfinite(s.gyro)) and np.all(np.isfinite(s.accel))):
            out.append(Violation("non_finite", f"{name}: non-finite sample values"))
        if np.any(np.abs(s.gyro) > GYRO_RANGE_DPS):
            out.append(Violation("range", f"{name}: gyro exceeds ±{GYRO_RANGE_DPS:g} deg/s "
                                          f"(max |value| {np.nanmax(np.abs(s.gyro)):g})"))
        if np.any(np.abs(s.accel) > ACCEL_RANGE_G):
            out.append(Violation("range", f"{name}: accel exceeds ±{ACCEL_RANGE_G:g} g "
                                          f"(max |value| {np.nanmax(np.abs(s.accel)):g})"))

    n = rec.n_samples
    for ser in rec.series:
        if ser.start_sample >= ser.end_sample:
            out.append(Violation("series_bounds", f"{ser.tag}: start must precede end"))
        if ser.start_sample < 0 or ser.end_sample > n:
            out.append(Violation("series_bounds", f"{ser.tag}: outside stream bounds [0, {n})"))
        if ser.exercise is Exercise.GHT and ser.performance is Performance.W:
            out.append(Violation("ght_wrong", f"{ser.tag}: GHT has no wrong-performance variant"))
    for a, b in itertools.combinations(rec.series, 2):
        if a.start_sample < b.end_sample and b.start_sample < a.end_sample:
            out.append(Violation("series_overlap", f"{a.tag} overlaps {b.tag}"))
    return out


def slice_series(rec: SessionRecording, series: ExerciseSeries) -> np.ndarray:
    """Return the ``(24, len(series))`` signal segments covered by ``series``."""
    if series not in rec.series:
        raise SeriesNotInRecording(f"{series.tag} is not a series of volunteer {rec.volunteer_id}")
    if series.start_sample >= series.end_sample or series.start_sample < 0:
        raise SeriesNotInRecording(f"{series.tag}: empty or negative interval")
    if series.end_sample > rec.n_samples:
        raise LabelOutOfBounds(f"{series.tag}: exceeds stream length {rec.n_samples}")
    lo, hi = series.start_sample, series.end_sample
    return np.vstack([s.signals()[lo:hi].T for s in rec.streams])


def ingest_label(exercise: str | Exercise, performance: str | Performance) -> tuple[Exercise, Performance]:
    """Normalize a raw label; a wrong heel-tiptoe gait is filed as wrong gait."""
    ex, perf = Exercise(exercise), Performance(performance)
    if ex is Exercise.GHT and perf is Performance.W:
        return Exercise.GAT, Performance.W
    return ex, perf


# ---------------------------------------------------------------------------
# canonical on-disk layout


def _read_imu_csv(path: Path, slot: int, placement: str) -> SensorStream:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header is None or tuple(h.strip() for h in header) != IMU_HEADER:
        raise DatasetFormatError(f"{path}: expected header {','.join(IMU_HEADER)}, got {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=float)
    if data.size == 0:
        data = np.empty((0, 7))
    if data.shape[1] != 7:
        raise DatasetFormatError(f"{path}: expected 7 columns, got {data.shape[1]}")
    return SensorStream(slot=slot, t=data[:, 0], gyro=data[:, 1:4], accel=data[:, 4:7], placement=placement)


def _read_labels(path: Path, volunteer_id: str) -> list[ExerciseSeries]:
    series = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LABELS_HEADER:
            raise DatasetFormatError(f"{path}: expected header {','.join(LABELS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if row["volunteer_id"] != volunteer_id:
                raise DatasetFormatError(f"{path}:{lineno}: volunteer {row['volunteer_id']!r} != {volunteer_id!r}")
            try:
                ex, perf = ingest_label(row["exercise"], row["performance"])
                series.append(ExerciseSeries(ex, perf, int(row["start_sample"]), int(row["end_sample"])))
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return series


def check_loaded(rec: SessionRecording, source: str = "") -> SessionRecording:
    """Raise the typed loading error for the first hard violation in ``rec``."""
    where = f" ({source})" if source else ""
    if len(rec.streams) != N_IMUS:
        raise MissingStream(f"volunteer {rec.volunteer_id}{where}: {len(rec.streams)} of {N_IMUS} IMU streams")
    for s in rec.streams:
        rate = s.observed_rate()
        if np.isfinite(rate) and abs(rate - s.nominal_rate) > RATE_TOLERANCE * s.nominal_rate:
            raise RateAnomaly(f"volunteer {rec.volunteer_id} IMU{s.slot}{where}: observed rate {rate:.3f} Hz")
    for ser in rec.series:
        if ser.start_sample < 0 or ser.end_sample > rec.n_samples or ser.start_sample >= ser.end_sample:
            raise LabelOutOfBounds(
                f"volunteer {rec.volunteer_id}{where}: series {ser.tag} outside [0, {rec.n_samples})"
            )
    problems = [v for v in validate_recording(rec) if v.code not in ("rate", "series_bounds", "stream_count")]
    if problems:
        raise DatasetFormatError(f"volunteer {rec.volunteer_id}{where}: " + "; ".join(map(str, problems)))
    return rec


def _load_canonical_volunteer(vdir: Path) -> SessionRecording:
    volunteer_id = vdir.name
    session_meta = {}
    meta_path = vdir / "session.yaml"
    if meta_path.exists():
        session_meta = yaml.safe_load(meta_path.read_text(encoding="utf-8")) or {}
    placements = session_meta.get("placements", {}) or {}
    streams = []
    for slot in range(1, N_IMUS + 1):
        path = vdir / f"imu{slot}.csv"
        if path.exists():
            streams.append(_read_imu_csv(path, slot, str(placements.get(slot, placements.get(f"IMU{slot}", "")))))
    if len(streams) != N_IMUS:
        raise MissingStream(f"volunteer {volunteer_id}: found {len(streams)} of {N_IMUS} IMU files in {vdir}")
    labels = vdir / "labels.csv"
    if not labels.exists():
        raise DatasetFormatError(f"volunteer {volunteer_id}: missing labels.csv")
    rec = SessionRecording(
        volunteer_id=volunteer_id,
        streams=tuple(streams),
        series=tuple(_read_labels(labels, volunteer_id)),
        meta=dict(session_meta.get("meta", {}) or {}),
    )
    return check_loaded(rec, str(vdir))


def load_canonical(root: str | os.PathLike, jobs: int = 1) -> list[SessionRecording]:
    root = Path(root)
    vdirs = sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith("."))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_load_canonical_volunteer, vdirs))
    return [_load_canonical_volunteer(v) for v in vdirs]


def load_dataset(root: str | os.PathLike, adapter: str = "canonical", jobs: int = 1) -> list[SessionRecording]:
    """Load every volunteer under ``root`` using the named layout adapter."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    if adapter == "canonical":
        return load_canonical(root, jobs=jobs)
    if adapter == "zenodo":
        from .zenodo import load_zenodo

        return load_zenodo(root)
    raise ValueError(f"unknown dataset adapter {adapter!r}; expected 'canonical' or 'zenodo'")


def write_canonical(recordings: Sequence[SessionRecording], root: str | os.PathLike) -> Path:
    """Write recordings in the canonical layout; returns ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for rec in recordings:
        vdir = root / rec.volunteer_id
        vdir.mkdir(exist_ok=True)
        for s in rec.streams:
            data = np.column_stack([s.t, s.gyro, s.accel])
            np.savetxt(vdir / f"imu{s.slot}.csv", data, delimiter=",", fmt="%.17g",
                       header=",".join(IMU_HEADER), comments="")
        with open(vdir / "labels.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LABELS_HEADER)
            for ser in rec.series:
                w.writerow([rec.volunteer_id, ser.exercise.value, ser.performance.value,
                            ser.start_sample, ser.end_sample])
        session = {"placements": {s.slot: s.placement for s in rec.streams}}
        if rec.meta:
            session["meta"] = dict(rec.meta)
        (vdir / "session.yaml").write_text(yaml.safe_dump(session, sort_keys=True), encoding="utf-8")
    return root
