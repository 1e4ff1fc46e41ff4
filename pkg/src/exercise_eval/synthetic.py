"""Deterministic synthetic four-IMU sessions for desk-scale tests.

Every (exercise, performance) class gets a waveform signature: per signal
an offset, an amplitude and an integer frequency in Hz. Integer
frequencies put a whole number of periods in every 100/200/300-sample
window, so with ``noise_std = 0`` window statistics are (nearly)
phase-free and classes stay separable.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from .dataset import (
    EXERCISES,
    N_IMUS,
    N_SIGNALS,
    NOMINAL_RATE_HZ,
    Exercise,
    ExerciseSeries,
    Performance,
    SensorStream,
    SessionRecording,
)
from .errors import InvalidConfig

# (offset_lo, offset_hi, amp_lo, amp_hi) for gyro [deg/s] and accel [g] signals
_GYRO_RANGES = (-60.0, 60.0, 20.0, 150.0)
_ACCEL_RANGES = (-1.0, 1.0, 0.05, 0.6)
_FREQS_HZ = (1, 2, 3, 4)


@dataclass(frozen=True)
class Signature:
    """Waveform family of one class: 24 offsets, amplitudes and frequencies."""

    offset: np.ndarray
    amp: np.ndarray
    freq: np.ndarray

    def __post_init__(self):
        for name in ("offset", "amp", "freq"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (N_SIGNALS,)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def render(self, n: int, phase: np.ndarray, amp_scale: float = 1.0) -> np.ndarray:
        """``(n, 24)`` noise-free waveform."""
        t = np.arange(n)[:, None] / NOMINAL_RATE_HZ
        return self.offset + amp_scale * self.amp * np.sin(2 * np.pi * self.freq * t + phase)


@dataclass(frozen=True)
class SynthConfig:
    n_volunteers: int = 8
    exercises: tuple[str, ...] = tuple(e.value for e in EXERCISES)
    reps: int = 3
    noise_std: float = 0.0
    class_signatures: str | Mapping = "auto"
    include_wrong: bool = True
    series_per_class: int = 2
    rep_samples: int = 200
    rest_samples: int = 50
    volunteer_jitter: float = 0.0
    signature_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "exercises", tuple(Exercise(e).value for e in self.exercises))

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown synth config keys: {sorted(unknown)}")
        try:
            return cls(**dict(data))
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "SynthConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if "seed" in data:
            data = {k: v for k, v in data.items() if k != "seed"}
        return cls.from_mapping(data)

    def to_mapping(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["exercises"] = list(self.exercises)
        if not isinstance(self.class_signatures, str):
            out["class_signatures"] = {
                k: {kk: np.asarray(vv).tolist() for kk, vv in v.items()} for k, v in self.class_signatures.items()
            }
        return out


def series_classes(config: SynthConfig) -> list[tuple[Exercise, Performance]]:
    """The (exercise, performance) series types a config generates."""
    out = []
    for ex in map(Exercise, config.exercises):
        out.append((ex, Performance.C))
        if config.include_wrong and ex.has_wrong_variant:
            out.append((ex, Performance.W))
    return out


def _class_key(ex: Exercise, perf: Performance) -> str:
    return f"{ex.value}-{perf.value}"


def auto_signature(ex: Exercise, perf: Performance, signature_seed: int = 0) -> Signature:
    """Deterministic signature for one class, independent of the other classes."""
    ex_idx = list(Exercise).index(ex)
    rng = np.random.default_rng([signature_seed, ex_idx, 0 if perf is Performance.C else 1])
    lo = np.tile(np.r_[[_GYRO_RANGES[0]] * 3, [_ACCEL_RANGES[0]] * 3], N_IMUS)
    hi = np.tile(np.r_[[_GYRO_RANGES[1]] * 3, [_ACCEL_RANGES[1]] * 3], N_IMUS)
    alo = np.tile(np.r_[[_GYRO_RANGES[2]] * 3, [_ACCEL_RANGES[2]] * 3], N_IMUS)
    ahi = np.tile(np.r_[[_GYRO_RANGES[3]] * 3, [_ACCEL_RANGES[3]] * 3], N_IMUS)
    offset = rng.uniform(lo, hi)
    amp = rng.uniform(alo, ahi)
    freq = rng.choice(_FREQS_HZ, size=N_SIGNALS)
    return Signature(offset=offset, amp=amp, freq=freq)


def resolve_signatures(config: SynthConfig) -> dict[tuple[Exercise, Performance], Signature]:
    classes = series_classes(config)
    if isinstance(config.class_signatures, str):
        if config.class_signatures != "auto":
            raise InvalidConfig(f"class_signatures must be 'auto' or a mapping, got {config.class_signatures!r}")
        sigs = {c: auto_signature(*c, signature_seed=config.signature_seed) for c in classes}
    else:
        sigs = {}
        for ex, perf in classes:
            key = _class_key(ex, perf)
            spec = config.class_signatures.get(key)
            if spec is None:
                raise InvalidConfig(f"class_signatures lacks an entry for {key}")
            try:
                sigs[(ex, perf)] = Signature(offset=spec.get("offset", 0.0), amp=spec["amp"], freq=spec["freq"])
            except (KeyError, ValueError) as exc:
                raise InvalidConfig(f"bad signature for {key}: {exc}") from exc
    seen = {}
    for cls, sig in sigs.items():
        key = (sig.offset.tobytes(), sig.amp.tobytes(), sig.freq.tobytes())
        if key in seen:
            raise InvalidConfig(f"classes {seen[key]} and {cls} share a signature")
        seen[key] = cls
    return sigs


def _validate(config: SynthConfig) -> None:
    if config.n_volunteers < 2:
        raise InvalidConfig("n_volunteers must be >= 2")
    if not config.exercises:
        raise InvalidConfig("exercises must not be empty")
    if config.reps < 1 or config.series_per_class < 1 or config.rep_samples < 2 or config.rest_samples < 0:
        raise InvalidConfig("reps, series_per_class, rep_samples must be positive and rest_samples >= 0")
    if config.noise_std < 0 or config.volunteer_jitter < 0:
        raise InvalidConfig("noise_std and volunteer_jitter must be non-negative")


def _rest(n: int) -> np.ndarray:
    block = np.zeros((n, N_SIGNALS))
    block[:, 3::6] = 1.0  # gravity on the x axis while standing still
    return block


def generate_volunteer(config: SynthConfig, volunteer_id: str, rng: np.random.Generator,
                       signatures: Mapping[tuple[Exercise, Performance], Signature]) -> SessionRecording:
    parts = [_rest(config.rest_samples)]
    series = []
    cursor = config.rest_samples
    amp_scale = 1.0 + config.volunteer_jitter * rng.uniform(-1.0, 1.0)
    length = config.reps * config.rep_samples
    for _ in range(config.series_per_class):
        for ex, perf in series_classes(config):
            sig = signatures[(ex, perf)]
            phase = rng.uniform(0.0, 2 * np.pi, size=N_SIGNALS)
            block = sig.render(length, phase, amp_scale)
            if config.noise_std > 0:
                block = block + rng.normal(0.0, config.noise_std, size=block.shape) * sig.amp
            parts.append(block)
            series.append(ExerciseSeries(ex, perf, cursor, cursor + length, repetitions=config.reps))
            cursor += length
            parts.append(_rest(config.rest_samples))
            cursor += config.rest_samples
    data = np.vstack(parts)
    t = np.arange(len(data)) / NOMINAL_RATE_HZ
    streams = tuple(
        SensorStream(slot=k + 1, t=t, gyro=data[:, 6 * k:6 * k + 3], accel=data[:, 6 * k + 3:6 * k + 6],
                     placement=f"IMU{k + 1}")
        for k in range(N_IMUS)
    )
    return SessionRecording(volunteer_id=volunteer_id, streams=streams, series=tuple(series))


def synth_generate(config: SynthConfig, seed: int) -> list[SessionRecording]:
    """Generate ``config.n_volunteers`` sessions; a pure function of (config, seed)."""
    _validate(config)
    signatures = resolve_signatures(config)
    width = max(2, len(str(config.n_volunteers)))
    children = np.random.SeedSequence(seed).spawn(config.n_volunteers)
    return [
        generate_volunteer(config, f"V{i + 1:0{width}d}", np.random.default_rng(child), signatures)
        for i, child in enumerate(children)
    ]
