"""The three end-to-end architectures: ReEv, ReCW and TwoStage.

* ``ReEv``: one classifier over 19 joint exercise/correctness classes.
* ``ReCW``: one classifier over the 10 correct exercises plus two pooled
  wrong classes, ``WU`` (upper limbs) and ``WL`` (lower limbs).
* ``TwoStage``: a 10-class exercise recognizer, then a binary correct/wrong
  evaluator per exercise, selected by the recognizer's output. A recognized
  GHT is reported as correct without an evaluator.

Inputs are :class:`~exercise_eval.features.FeatureTable` objects whose
features are already in the model space (standardized or not); the
pipeline stores the standardizer used for reference.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifiers import AlgoConfig, TrainedModel, accuracy, train, tune
from .dataset import Exercise, LimbGroup, Performance
from .errors import DimensionMismatch, IncompleteResults, MissingExerciseData
from .features import FeatureTable, Standardizer
from .labels import (EVALUATED_EXERCISES, EXERCISE_ORDER, WRONG_LOWER, WRONG_UPPER, LabelScheme, decode_reev,
                     make_labels, scheme_classes, size_recw_wrong_pools, sample_recw_wrong_pools)
from .serialize import FormatError, load_arrays, model_from_arrays, model_to_arrays, save_arrays

PIPELINE_FORMAT = "exercise-eval-pipeline"
PIPELINE_VERSION = 1
UNKNOWN = "Unknown"


class PipelineKind(str, Enum):
    REEV = "ReEv"
    RECW = "ReCW"
    TWO_STAGE = "TwoStage"

    @classmethod
    def parse(cls, value: "PipelineKind | str") -> "PipelineKind":
        if isinstance(value, cls):
            return value
        aliases = {"reev": cls.REEV, "recw": cls.RECW, "rec-w": cls.RECW, "two-stage": cls.TWO_STAGE,
                   "twostage": cls.TWO_STAGE, "1re-2ev": cls.TWO_STAGE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown pipeline {value!r}") from None

    @property
    def cli_name(self) -> str:
        return {"ReEv": "reev", "ReCW": "recw", "TwoStage": "two-stage"}[self.value]


@dataclass(frozen=True)
class Decision:
    """Outcome for one window.

    ``exercise`` is an exercise code, or ``WU``/``WL`` for a pooled wrong
    decision; ``performance`` is ``C``, ``W`` or ``Unknown``; ``label`` is
    the scheme-native class string.
    """

    exercise: str
    performance: str
    label: str

    @property
    def joint_label(self) -> str:
        """Single-step (19-class) string when the decision carries an exercise."""
        if self.exercise == Exercise.GHT.value:
            return Exercise.GHT.value
        return f"{self.exercise}-{self.performance}"


@dataclass(frozen=True)
class PipelineModel:
    kind: PipelineKind
    primary: TrainedModel
    evaluators: Mapping[str, TrainedModel] = field(default_factory=dict)
    standardizer: Standardizer | None = None
    exercises: tuple[str, ...] = tuple(e.value for e in EXERCISE_ORDER)
    info: Mapping = field(default_factory=dict)

    @property
    def classes(self) -> tuple[str, ...]:
        return self.primary.classes

    @property
    def n_features(self) -> int:
        return self.primary.n_features


# ---------------------------------------------------------------------------
# fitting


def _present_exercises(table: FeatureTable, exercises: Sequence[str]) -> None:
    have = set(map(str, table.exercises))
    missing = [e for e in exercises if e not in have]
    if missing:
        raise MissingExerciseData(f"no training windows for exercise(s) {missing}")


def _fit_one(config: AlgoConfig, X, y, Xv, yv, classes, seed, do_tune: bool) -> tuple[TrainedModel, dict]:
    tuned = config
    info: dict = {}
    if do_tune and Xv is not None and len(Xv):
        res = tune(config, (X, y), (Xv, yv), seed=seed, classes=classes)
        tuned = res.config
        info = {"tuned_hyperparams": dict(tuned.hyperparams),
                "val_accuracy": None if np.isnan(res.val_accuracy) else res.val_accuracy}
    return train(tuned, X, y, seed=seed, classes=classes), info


def recw_training_selection(train_table: FeatureTable, seed: int,
                            exercises: Sequence[str] | None = None) -> tuple[np.ndarray, dict]:
    """Row indices of the balanced ReCW training set and a pool report.

    All correct windows are kept; WU/WL are drawn from the wrong windows of
    each limb group up to twice the largest correct class of that group.
    """
    exercises = [e.value for e in EXERCISE_ORDER] if exercises is None else list(exercises)
    perf = np.asarray(train_table.performances, dtype=object)
    ex = np.asarray(train_table.exercises, dtype=object)
    correct_idx = np.flatnonzero(perf == Performance.C.value)
    wrong_idx = np.flatnonzero(perf == Performance.W.value)
    counts = Counter(ex[correct_idx])
    targets = size_recw_wrong_pools({e: counts.get(e, 0) for e in exercises}, exercises)
    sel = sample_recw_wrong_pools(ex[wrong_idx], targets, seed)
    rows = np.sort(np.concatenate([correct_idx, wrong_idx[sel.indices]]))
    report = {"targets": sel.targets, "pool_sizes": sel.pool_sizes, "per_exercise": sel.per_exercise,
              "undersized": sel.undersized,
              "selected": {WRONG_UPPER: int(sum(v for k, v in sel.per_exercise.items()
                                                 if Exercise(k).limb_group is LimbGroup.UPPER)),
                           WRONG_LOWER: int(sum(v for k, v in sel.per_exercise.items()
                                                 if Exercise(k).limb_group is LimbGroup.LOWER))}}
    return rows, report


def fit_pipeline(kind: PipelineKind | str, algo: AlgoConfig | str, train_table: FeatureTable,
                 val_table: FeatureTable | None = None, seed: int = 0,
                 stage2_algo: AlgoConfig | str | Mapping[str, AlgoConfig] | None = None,
                 exercises: Sequence[str] | None = None, standardizer: Standardizer | None = None,
                 do_tune: bool = True) -> PipelineModel:
    """Fit one architecture on ``train_table``.

    When ``val_table`` is given and ``do_tune`` is set, the algorithm's
    hyperparameter grid is searched on it. For TwoStage, ``stage2_algo`` may
    map exercise codes to per-exercise configurations (default: ``algo``).
    """
    kind = PipelineKind.parse(kind)
    algo = algo if isinstance(algo, AlgoConfig) else AlgoConfig(algo)
    if exercises is None:
        present = set(map(str, train_table.exercises))
        exercises = tuple(e.value for e in EXERCISE_ORDER if e.value in present) if present else ()
        if not exercises:
            raise MissingExerciseData("training table is empty")
    exercises = tuple(Exercise(e).value for e in exercises)
    _present_exercises(train_table, exercises)
    X = train_table.X
    Xv = val_table.X if val_table is not None else None
    info: dict = {"seed": seed}

    if kind is PipelineKind.REEV:
        classes = scheme_classes(LabelScheme.REEV, exercises)
        y = make_labels(LabelScheme.REEV, train_table.exercises, train_table.performances)
        yv = make_labels(LabelScheme.REEV, val_table.exercises, val_table.performances) if Xv is not None else None
        model, info["primary"] = _fit_one(algo, X, y, Xv, yv, classes, seed, do_tune)
        return PipelineModel(kind, model, {}, standardizer, exercises, info)

    if kind is PipelineKind.RECW:
        classes = scheme_classes(LabelScheme.RECW, exercises)
        rows, info["pools"] = recw_training_selection(train_table, seed, exercises)
        sub = train_table.subset(rows)
        y = make_labels(LabelScheme.RECW, sub.exercises, sub.performances)
        info["pools"]["training_class_counts"] = {c: int(n) for c, n in sorted(Counter(y).items())}
        yv = make_labels(LabelScheme.RECW, val_table.exercises, val_table.performances) if Xv is not None else None
        model, info["primary"] = _fit_one(algo, sub.X, y, Xv, yv, classes, seed, do_tune)
        return PipelineModel(kind, model, {}, standardizer, exercises, info)

    classes = scheme_classes(LabelScheme.STAGE1, exercises)
    y = make_labels(LabelScheme.STAGE1, train_table.exercises, train_table.performances)
    yv = make_labels(LabelScheme.STAGE1, val_table.exercises, val_table.performances) if Xv is not None else None
    stage1, info["primary"] = _fit_one(algo, X, y, Xv, yv, classes, seed, do_tune)
    evaluators: dict[str, TrainedModel] = {}
    info["evaluators"] = {}
    for ex in (e.value for e in EVALUATED_EXERCISES if e.value in exercises):
        cfg = _stage2_config(stage2_algo, ex, algo)
        tr = train_table.subset(np.asarray(train_table.exercises, dtype=object) == ex)
        ytr = make_labels(LabelScheme.STAGE2, tr.exercises, tr.performances)
        va, yva = None, None
        if val_table is not None:
            va = val_table.subset(np.asarray(val_table.exercises, dtype=object) == ex)
            yva = make_labels(LabelScheme.STAGE2, va.exercises, va.performances)
        evaluators[ex], info["evaluators"][ex] = _fit_one(
            cfg, tr.X, ytr, None if va is None else va.X, yva, scheme_classes(LabelScheme.STAGE2), seed, do_tune)
    return PipelineModel(kind, stage1, evaluators, standardizer, exercises, info)


def _stage2_config(stage2_algo, exercise: str, default: AlgoConfig) -> AlgoConfig:
    if stage2_algo is None:
        return default
    if isinstance(stage2_algo, Mapping):
        cfg = stage2_algo.get(exercise, default)
    else:
        cfg = stage2_algo
    return cfg if isinstance(cfg, AlgoConfig) else AlgoConfig(cfg)


# ---------------------------------------------------------------------------
# prediction


@dataclass(frozen=True)
class BatchPrediction:
    """Per-window outputs of a pipeline over a batch."""

    native: np.ndarray          # scheme-native labels (19, 12 or 10-class space)
    decisions: list[Decision]
    stage1: np.ndarray | None = None   # TwoStage recognizer output
    stage2: np.ndarray | None = None   # TwoStage evaluator output (C/W; GHT -> C)


def _decode(kind: PipelineKind, label: str, perf: str | None = None) -> Decision:
    if kind is PipelineKind.REEV:
        ex, p = decode_reev(label)
        return Decision(ex.value, p.value, label)
    if kind is PipelineKind.RECW:
        if label in (WRONG_UPPER, WRONG_LOWER):
            return Decision(label, Performance.W.value, label)
        return Decision(label, Performance.C.value, label)
    return Decision(label, perf if perf is not None else UNKNOWN, label)


def predict_batch(model: PipelineModel, X: np.ndarray) -> BatchPrediction:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"pipeline expects {model.n_features} features, got {X.shape[1]}")
    native = model.primary.predict_batch(X)
    if model.kind is not PipelineKind.TWO_STAGE:
        return BatchPrediction(native, [_decode(model.kind, str(lab)) for lab in native])
    perf = np.full(len(X), Performance.C.value, dtype=object)
    for ex, evaluator in model.evaluators.items():
        rows = np.flatnonzero(native == ex)
        if len(rows):
            perf[rows] = evaluator.predict_batch(X[rows])
    decisions = [_decode(model.kind, str(lab), str(p)) for lab, p in zip(native, perf)]
    return BatchPrediction(native, decisions, stage1=native, stage2=perf)


def predict_pipeline(model: PipelineModel, x: np.ndarray) -> Decision:
    """Decision for one standardized feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("predict_pipeline takes a single feature vector")
    return predict_batch(model, x[None, :]).decisions[0]


def truth_labels(kind: PipelineKind | str, table: FeatureTable) -> np.ndarray:
    """Scheme-native ground truth of every window of ``table``."""
    kind = PipelineKind.parse(kind)
    scheme = {PipelineKind.REEV: LabelScheme.REEV, PipelineKind.RECW: LabelScheme.RECW,
              PipelineKind.TWO_STAGE: LabelScheme.STAGE1}[kind]
    return make_labels(scheme, table.exercises, table.performances)


# ---------------------------------------------------------------------------
# per-exercise evaluator selection


def select_stage2_algos(candidates: Sequence[AlgoConfig], val_results: Mapping[str, Sequence[Mapping]],
                        exercises: Sequence[str] | None = None) -> dict[str, AlgoConfig]:
    """Best candidate per exercise by validation accuracy, then F1, then list order.

    ``val_results[exercise][i]`` holds ``{"acc": .., "f1": ..}`` for
    ``candidates[i]``.
    """
    if not candidates:
        raise IncompleteResults("no candidate algorithms")
    exercises = [e.value for e in EVALUATED_EXERCISES] if exercises is None else list(exercises)
    out = {}
    for ex in exercises:
        res = val_results.get(ex)
        if res is None or len(res) != len(candidates) or any(r is None for r in res):
            raise IncompleteResults(f"missing validation results for {ex}")

        def key(i):
            acc = res[i].get("acc")
            f1 = res[i].get("f1")
            return (-(acc if acc is not None else -np.inf), -(f1 if f1 is not None else -np.inf), i)

        out[ex] = candidates[min(range(len(candidates)), key=key)]
    return out


def stage2_validation_results(candidates: Sequence[AlgoConfig], train_table: FeatureTable,
                              val_table: FeatureTable, seed: int = 0) -> dict[str, list[dict]]:
    """Validation accuracy and macro F1 of every candidate evaluator per exercise."""
    from .evaluation import all_class_metrics, confusion, macro_average

    out: dict[str, list[dict]] = {}
    for ex in (e.value for e in EVALUATED_EXERCISES):
        tr = train_table.subset(np.asarray(train_table.exercises, dtype=object) == ex)
        va = val_table.subset(np.asarray(val_table.exercises, dtype=object) == ex)
        if not len(tr) or not len(va):
            continue
        ytr = make_labels(LabelScheme.STAGE2, tr.exercises, tr.performances)
        yva = make_labels(LabelScheme.STAGE2, va.exercises, va.performances)
        rows = []
        for cfg in candidates:
            m = train(cfg, tr.X, ytr, seed=seed, classes=("C", "W"))
            pred = m.predict_batch(va.X)
            macro, _ = macro_average(all_class_metrics(confusion(list(yva), list(pred), ("C", "W"))))
            rows.append({"acc": 100.0 * accuracy(yva, pred), "f1": macro["f1"]})
        out[ex] = rows
    return out


# ---------------------------------------------------------------------------
# container


def save_pipeline(model: PipelineModel, path: str | os.PathLike) -> Path:
    arrays = model_to_arrays(model.primary, "primary/")
    for ex, m in model.evaluators.items():
        arrays.update(model_to_arrays(m, f"evaluator/{ex}/"))
    if model.standardizer is not None:
        arrays["pipeline_standardizer/means"] = model.standardizer.means
        arrays["pipeline_standardizer/stds"] = model.standardizer.stds
    meta = {"format": PIPELINE_FORMAT, "version": PIPELINE_VERSION, "kind": model.kind.value,
            "exercises": list(model.exercises), "evaluators": sorted(model.evaluators),
            "info": model.info}
    arrays["__pipeline__"] = np.array(json.dumps(meta, sort_keys=True, default=_json_default))
    return save_arrays(arrays, path)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def load_pipeline(path: str | os.PathLike) -> PipelineModel:
    arrays = load_arrays(path)
    try:
        meta = json.loads(str(arrays["__pipeline__"]))
    except KeyError as exc:
        raise FormatError("not a pipeline container") from exc
    if meta.get("format") != PIPELINE_FORMAT or meta.get("version") != PIPELINE_VERSION:
        raise FormatError(f"unsupported pipeline container {meta.get('format')!r} v{meta.get('version')}")
    primary = model_from_arrays(arrays, "primary/")
    evaluators = {ex: model_from_arrays(arrays, f"evaluator/{ex}/") for ex in meta["evaluators"]}
    std = None
    if "pipeline_standardizer/means" in arrays:
        std = Standardizer(arrays["pipeline_standardizer/means"], arrays["pipeline_standardizer/stds"])
    return PipelineModel(PipelineKind(meta["kind"]), primary, evaluators, std, tuple(meta["exercises"]),
                         meta["info"])
