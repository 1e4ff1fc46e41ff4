"""Sliding-window segmentation and the 96 time-domain window features.

Feature layout, for IMU slot 1..4, signal gx, gy, gz, ax, ay, az and
statistic mean, std, max, min (nested in that order)::

    index = 24 * (slot - 1) + 4 * signal + statistic

The standard deviation is the population form (divide by the window
length).
"""

from __future__ import annotations

import csv
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import N_IMUS, N_SIGNALS, SIGNALS, Exercise, Performance, SessionRecording, slice_series
from .errors import InsufficientData, LengthMismatch

WINDOW_SIZES = (100, 200, 300)
OVERLAP = 0.5
STATISTICS = ("mean", "std", "max", "min")
N_FEATURES = N_SIGNALS * len(STATISTICS)
DEGENERATE_STD = 1e-12


def feature_names() -> list[str]:
    return [f"imu{k + 1}_{sig}_{stat}" for k in range(N_IMUS) for sig in SIGNALS for stat in STATISTICS]


@dataclass(frozen=True)
class WindowSpec:
    size_samples: int = 300
    overlap_fraction: float = OVERLAP

    def __post_init__(self):
        if self.size_samples not in WINDOW_SIZES:
            raise ValueError(f"window size must be one of {WINDOW_SIZES}, got {self.size_samples}")
        if self.overlap_fraction != OVERLAP:
            raise ValueError("overlap is fixed at 50%")

    @property
    def step(self) -> int:
        return self.size_samples // 2


@dataclass(frozen=True)
class Window:
    volunteer_id: str
    exercise: Exercise
    performance: Performance
    start_index: int
    size_samples: int


def segment(series_length: int, spec: WindowSpec | int) -> list[int]:
    """Start indices of every full window inside a series of ``series_length`` samples."""
    size = spec.size_samples if isinstance(spec, WindowSpec) else int(spec)
    if size < 2 or size % 2:
        raise ValueError(f"window size must be an even integer >= 2, got {size}")
    if series_length < size:
        return []
    return list(range(0, series_length - size + 1, size // 2))


def _stats(windows: np.ndarray) -> np.ndarray:
    """``windows`` is ``(..., 24, W)``; returns ``(..., 96)``."""
    mean = windows.mean(axis=-1)
    mx = windows.max(axis=-1)
    mn = windows.min(axis=-1)
    std = windows.std(axis=-1)
    flat = mx == mn
    std = np.where(flat, 0.0, std)
    mean = np.clip(mean, mn, mx)
    return np.stack([mean, std, mx, mn], axis=-1).reshape(*windows.shape[:-2], N_FEATURES)


def extract_features(segments: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """96-feature vector of one window given its 24 signal segments."""
    try:
        arr = np.asarray(segments, dtype=float)
    except ValueError as exc:
        raise LengthMismatch("segments must all have the same length") from exc
    if arr.ndim != 2 or arr.shape[0] != N_SIGNALS:
        raise LengthMismatch(f"expected {N_SIGNALS} equal-length segments, got shape {arr.shape}")
    if arr.shape[1] < 2:
        raise LengthMismatch("window length must be >= 2")
    return _stats(arr)


def series_features(segments: np.ndarray, size: int) -> tuple[np.ndarray, list[int]]:
    """Features of all windows of one series; ``segments`` is ``(24, L)``."""
    starts = segment(segments.shape[1], size)
    if not starts:
        return np.empty((0, N_FEATURES)), starts
    views = sliding_window_view(segments, size, axis=1)[:, starts, :]  # (24, n, W)
    return _stats(np.moveaxis(views, 1, 0)), starts


@dataclass
class FeatureTable:
    """Rows of window features with their provenance."""

    X: np.ndarray
    volunteer_ids: np.ndarray
    exercises: np.ndarray
    performances: np.ndarray
    window_starts: np.ndarray
    window_size: int
    dropped_series: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.X)

    def subset(self, mask_or_index) -> "FeatureTable":
        return FeatureTable(
            X=self.X[mask_or_index],
            volunteer_ids=self.volunteer_ids[mask_or_index],
            exercises=self.exercises[mask_or_index],
            performances=self.performances[mask_or_index],
            window_starts=self.window_starts[mask_or_index],
            window_size=self.window_size,
            dropped_series=self.dropped_series,
        )

    def for_volunteers(self, ids: Iterable[str]) -> "FeatureTable":
        return self.subset(np.isin(self.volunteer_ids, list(ids)))

    def windows(self) -> list[Window]:
        return [
            Window(str(v), Exercise(e), Performance(p), int(s), self.window_size)
            for v, e, p, s in zip(self.volunteer_ids, self.exercises, self.performances, self.window_starts)
        ]

    def window_counts(self) -> dict[str, dict[str, int]]:
        """Window count per volunteer and ``EXERCISE-PERFORMANCE`` class."""
        out: dict[str, dict[str, int]] = {}
        for (v, e, p), n in sorted(Counter(zip(self.volunteer_ids, self.exercises, self.performances)).items()):
            out.setdefault(str(v), {})[f"{e}-{p}"] = n
        return out


def featurize(recordings: Sequence[SessionRecording], window_size: int) -> FeatureTable:
    """Window every labeled series of every recording and extract features.

    Series shorter than the window produce no rows and are listed in
    ``dropped_series``.
    """
    WindowSpec(window_size)
    blocks, vids, exs, perfs, starts_all, dropped = [], [], [], [], [], []
    for rec in recordings:
        for ser in rec.series:
            feats, starts = series_features(slice_series(rec, ser), window_size)
            if not starts:
                dropped.append({"volunteer_id": rec.volunteer_id, "exercise": ser.exercise.value,
                                "performance": ser.performance.value, "start_sample": ser.start_sample,
                                "length": len(ser)})
                continue
            blocks.append(feats)
            n = len(starts)
            vids += [rec.volunteer_id] * n
            exs += [ser.exercise.value] * n
            perfs += [ser.performance.value] * n
            # window_start is relative to the session timeline
            starts_all += [ser.start_sample + s for s in starts]
    X = np.vstack(blocks) if blocks else np.empty((0, N_FEATURES))
    return FeatureTable(
        X=X,
        volunteer_ids=np.array(vids, dtype=object),
        exercises=np.array(exs, dtype=object),
        performances=np.array(perfs, dtype=object),
        window_starts=np.array(starts_all, dtype=np.int64),
        window_size=window_size,
        dropped_series=dropped,
    )


DUMP_HEADER = ["volunteer_id", "exercise", "performance", "window_start"] + [f"f{i}" for i in range(N_FEATURES)]


def write_feature_dump(table: FeatureTable, path: str | os.PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DUMP_HEADER)
        for i in range(len(table)):
            w.writerow([table.volunteer_ids[i], table.exercises[i], table.performances[i],
                        int(table.window_starts[i])] + ["%.17g" % v for v in table.X[i]])
    return path


def read_feature_dump(path: str | os.PathLike, window_size: int) -> FeatureTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DUMP_HEADER:
            raise ValueError(f"{path}: not a feature dump")
        rows = list(reader)
    X = np.array([[float(v) for v in r[4:]] for r in rows], dtype=float).reshape(-1, N_FEATURES)
    return FeatureTable(
        X=X,
        volunteer_ids=np.array([r[0] for r in rows], dtype=object),
        exercises=np.array([r[1] for r in rows], dtype=object),
        performances=np.array([r[2] for r in rows], dtype=object),
        window_starts=np.array([int(r[3]) for r in rows], dtype=np.int64),
        window_size=window_size,
    )


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.means) / self.stds

    def invert(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.stds + self.means

    @classmethod
    def identity(cls, dim: int = N_FEATURES) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))


def fit_standardizer(train_features: np.ndarray | Sequence[np.ndarray]) -> Standardizer:
    X = np.asarray(train_features, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise InsufficientData("need at least 2 feature vectors to fit a standardizer")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds < DEGENERATE_STD, 1.0, stds)
    return Standardizer(means, stds)


def apply_standardizer(s: Standardizer, x: np.ndarray) -> np.ndarray:
    return s.apply(x)
