"""Class labels for the three classification schemes.

Label strings are the ones printed in reports: ``EAH-C``, ``EAH-W``,
``GHT``, ``WU``, ``WL``, ``C``, ``W``. Class lists are ordered with the
correct block first (GHT inside it) and the wrong block after, exercises
in the order EAH, EFE, SQZ, GAT, GHT, HAL, HAR, KFL, KFR, SQT.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .dataset import Exercise, LimbGroup, Performance
from .errors import InvalidCombination, MissingClass

EXERCISE_ORDER = tuple(
    Exercise(e) for e in ("EAH", "EFE", "SQZ", "GAT", "GHT", "HAL", "HAR", "KFL", "KFR", "SQT")
)
EVALUATED_EXERCISES = tuple(e for e in EXERCISE_ORDER if e.has_wrong_variant)
WRONG_UPPER = "WU"
WRONG_LOWER = "WL"


class LabelScheme(str, Enum):
    REEV = "ReEv"
    RECW = "ReCW"
    STAGE1 = "Stage1"
    STAGE2 = "Stage2"


@dataclass(frozen=True)
class LabeledSample:
    features: np.ndarray
    label: str
    volunteer_id: str
    exercise: Exercise
    performance: Performance
    window_start: int


def label_reev(exercise: Exercise | str, performance: Performance | str) -> str:
    ex, perf = Exercise(exercise), Performance(performance)
    if ex is Exercise.GHT:
        if perf is Performance.W:
            raise InvalidCombination("GHT has no wrong variant; wrong heel-tiptoe gait is labeled GAT-W")
        return ex.value
    return f"{ex.value}-{perf.value}"


def decode_reev(label: str) -> tuple[Exercise, Performance]:
    if label == Exercise.GHT.value:
        return Exercise.GHT, Performance.C
    ex, _, perf = label.partition("-")
    try:
        return Exercise(ex), Performance(perf)
    except ValueError as exc:
        raise InvalidCombination(f"not a ReEv label: {label!r}") from exc


def label_recw(exercise: Exercise | str, performance: Performance | str) -> str:
    ex, perf = Exercise(exercise), Performance(performance)
    if perf is Performance.C:
        return ex.value
    return WRONG_UPPER if ex.limb_group is LimbGroup.UPPER else WRONG_LOWER


def label_stage1(exercise: Exercise | str) -> str:
    return Exercise(exercise).value


def label_stage2(performance: Performance | str) -> str:
    return Performance(performance).value


def scheme_classes(scheme: LabelScheme | str, exercises: Sequence[Exercise | str] | None = None) -> list[str]:
    """Ordered class list of a scheme, optionally restricted to some exercises."""
    scheme = LabelScheme(scheme)
    chosen = set(map(Exercise, exercises)) if exercises is not None else set(EXERCISE_ORDER)
    order = [e for e in EXERCISE_ORDER if e in chosen]
    if scheme is LabelScheme.REEV:
        return [label_reev(e, Performance.C) for e in order] + [
            label_reev(e, Performance.W) for e in order if e.has_wrong_variant
        ]
    if scheme is LabelScheme.RECW:
        groups = {e.limb_group for e in order}
        return [e.value for e in order] + [
            lab for grp, lab in ((LimbGroup.UPPER, WRONG_UPPER), (LimbGroup.LOWER, WRONG_LOWER)) if grp in groups
        ]
    if scheme is LabelScheme.STAGE1:
        return [e.value for e in order]
    return [Performance.C.value, Performance.W.value]


def make_labels(scheme: LabelScheme | str, exercises: Sequence[str], performances: Sequence[str]) -> np.ndarray:
    """Vectorized labeling of window provenance arrays."""
    scheme = LabelScheme(scheme)
    if scheme is LabelScheme.REEV:
        fn = label_reev
    elif scheme is LabelScheme.RECW:
        fn = label_recw
    elif scheme is LabelScheme.STAGE1:
        return np.array([label_stage1(e) for e in exercises], dtype=object)
    else:
        return np.array([label_stage2(p) for p in performances], dtype=object)
    return np.array([fn(e, p) for e, p in zip(exercises, performances)], dtype=object)


def size_recw_wrong_pools(correct_class_counts: Mapping[str, int],
                          exercises: Sequence[Exercise | str] | None = None) -> tuple[int, int]:
    """WU and WL targets: twice the largest correct class of each limb group."""
    required = [Exercise(e) for e in exercises] if exercises is not None else list(EXERCISE_ORDER)
    missing = [e.value for e in required if e.value not in correct_class_counts]
    if missing:
        raise MissingClass(f"no correct-class count for {missing}")
    upper = [correct_class_counts[e.value] for e in required if e.limb_group is LimbGroup.UPPER]
    lower = [correct_class_counts[e.value] for e in required if e.limb_group is LimbGroup.LOWER]
    return 2 * max(upper, default=0), 2 * max(lower, default=0)


@dataclass(frozen=True)
class PoolSelection:
    indices: np.ndarray
    per_exercise: dict[str, int]
    pool_sizes: dict[str, int]
    targets: dict[str, int]
    undersized: dict[str, bool]


def _proportional_quota(sizes: list[int], target: int) -> list[int]:
    """Largest-remainder apportionment of ``target`` over pools of ``sizes``."""
    total = sum(sizes)
    if target >= total:
        return list(sizes)
    exact = [target * n / total for n in sizes]
    quota = [int(np.floor(x)) for x in exact]
    rest = target - sum(quota)
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - quota[i]), i))
    for i in order[:rest]:
        quota[i] += 1
    return quota


def sample_recw_wrong_pools(wrong_exercises: Sequence[Exercise | str], targets: tuple[int, int],
                            seed: int) -> PoolSelection:
    """Pick the wrong-performance windows that form the WU/WL training classes.

    ``wrong_exercises[i]`` is the source exercise of candidate window ``i``.
    Within each limb group, ``min(target, pool)`` windows are drawn without
    replacement, apportioned across source exercises in proportion to their
    pool sizes. Returned indices are sorted.
    """
    ex_arr = np.array([Exercise(e).value for e in wrong_exercises], dtype=object)
    rng = np.random.default_rng(seed)
    chosen = []
    per_exercise, pool_sizes, tgt_out, undersized = {}, {}, {}, {}
    for group, label, target in ((LimbGroup.UPPER, WRONG_UPPER, targets[0]), (LimbGroup.LOWER, WRONG_LOWER, targets[1])):
        members = [e for e in EXERCISE_ORDER if e.limb_group is group and e.has_wrong_variant]
        pools = [np.flatnonzero(ex_arr == e.value) for e in members]
        sizes = [len(p) for p in pools]
        pool_sizes[label] = sum(sizes)
        tgt_out[label] = int(target)
        undersized[label] = target > sum(sizes)
        for e, pool, q in zip(members, pools, _proportional_quota(sizes, int(target))):
            if q:
                chosen.append(rng.choice(pool, size=q, replace=False))
            per_exercise[e.value] = q
    idx = np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=np.int64)
    return PoolSelection(idx.astype(np.int64), per_exercise, pool_sizes, tgt_out, undersized)
