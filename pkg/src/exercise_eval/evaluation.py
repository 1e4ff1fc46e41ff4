"""Leave-one-subject-out planning, confusion matrices and per-class metrics.

Per-class metrics use the one-vs-rest reduction of a multiclass confusion
matrix (rows = actual, columns = predicted)::

    P = row sum, N = total - P, TP = diagonal cell,
    FN = P - TP, FP = column sum - TP, TN = N - FP

    acc  = 100 (TP + TN) / (P + N)
    prec = 100 TP / (TP + FP)
    sens = 100 TP / (TP + FN)
    f1   = 100 2TP / (2TP + FP + FN)
    spec = 100 TN / (TN + FP)

A metric whose denominator is zero is ``None`` (undefined) and is left out
of averages; the number of exclusions is reported alongside.
"""

from __future__ import annotations

import csv
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ClassMismatch, SchemeMismatch, TooFewVolunteers, UnknownLabel
from .labels import decode_reev

METRIC_NAMES = ("acc", "prec", "sens", "f1", "spec")
N_VALIDATION = 5


# ---------------------------------------------------------------------------
# LOSO plan


@dataclass(frozen=True)
class Fold:
    index: int
    test_volunteer: str
    validation_volunteers: tuple[str, ...]
    train_volunteers: tuple[str, ...]


@dataclass(frozen=True)
class LosoPlan:
    folds: tuple[Fold, ...]
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def plan_loso(volunteer_ids: Sequence[str], seed: int | None = None, n_validation: int = N_VALIDATION) -> LosoPlan:
    """One fold per volunteer: test = that volunteer, validation = the next
    ``n_validation`` volunteers cyclically, train = the rest.

    The base ordering is the sorted ids, permuted by ``seed`` when given.
    """
    ids = sorted({str(v) for v in volunteer_ids})
    if len(ids) < n_validation + 2:
        raise TooFewVolunteers(f"LOSO needs at least {n_validation + 2} volunteers, got {len(ids)}")
    if seed is not None:
        ids = [ids[i] for i in np.random.default_rng(seed).permutation(len(ids))]
    n = len(ids)
    folds = []
    for i, test in enumerate(ids):
        val = tuple(ids[(i + k) % n] for k in range(1, n_validation + 1))
        train = tuple(v for v in ids if v != test and v not in val)
        folds.append(Fold(i, test, val, train))
    return LosoPlan(tuple(folds), seed)


# ---------------------------------------------------------------------------
# confusion matrices and metrics


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        counts = np.asarray(self.counts)
        if counts.shape != (len(self.classes), len(self.classes)):
            raise ValueError(f"counts shape {counts.shape} does not match {len(self.classes)} classes")
        object.__setattr__(self, "counts", counts)

    def __eq__(self, other) -> bool:
        return (isinstance(other, ConfusionMatrix) and self.classes == other.classes
                and np.array_equal(self.counts, other.counts))

    @property
    def total(self):
        return self.counts.sum()

    def accuracy(self) -> float | None:
        """Overall percentage of windows on the diagonal."""
        total = self.counts.sum()
        return None if total == 0 else 100.0 * float(np.trace(self.counts)) / float(total)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ClassMismatch("cannot add confusion matrices over different class lists")
        return ConfusionMatrix(self.classes, self.counts + other.counts)

    def to_rows(self) -> list[list]:
        return [[""] + list(self.classes)] + [[c] + self.counts[i].tolist() for i, c in enumerate(self.classes)]


def confusion(truth: Sequence[str], preds: Sequence[str], classes: Sequence[str]) -> ConfusionMatrix:
    if len(truth) != len(preds):
        raise ValueError(f"truth and predictions differ in length ({len(truth)} vs {len(preds)})")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, preds):
        try:
            counts[index[t], index[p]] += 1
        except KeyError as exc:
            raise UnknownLabel(f"label {exc.args[0]!r} not in class list") from None
    return ConfusionMatrix(tuple(classes), counts)


@dataclass(frozen=True)
class Metrics:
    acc: float | None
    prec: float | None
    sens: float | None
    f1: float | None
    spec: float | None
    tp: int
    fp: int
    tn: int
    fn: int

    def as_dict(self) -> dict:
        return asdict(self)


def _pct(num, den) -> float | None:
    return None if den == 0 else 100.0 * num / den


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> Metrics:
    tp, fp, tn, fn = int(tp), int(fp), int(tn), int(fn)
    return Metrics(
        acc=_pct(tp + tn, tp + fp + tn + fn),
        prec=_pct(tp, tp + fp),
        sens=_pct(tp, tp + fn),
        f1=_pct(2 * tp, 2 * tp + fp + fn),
        spec=_pct(tn, tn + fp),
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def per_class_metrics(m: ConfusionMatrix, cls: str) -> Metrics:
    try:
        i = m.classes.index(cls)
    except ValueError:
        raise UnknownLabel(f"class {cls!r} not in confusion matrix") from None
    c = m.counts
    total = int(c.sum())
    p = int(c[i].sum())
    tp = int(c[i, i])
    fn = p - tp
    fp = int(c[:, i].sum()) - tp
    tn = (total - p) - fp
    return metrics_from_counts(tp, fp, tn, fn)


def all_class_metrics(m: ConfusionMatrix) -> dict[str, Metrics]:
    return {c: per_class_metrics(m, c) for c in m.classes}


def macro_average(per_class: Mapping[str, Metrics], skip_absent: bool = True) -> tuple[dict, dict]:
    """Unweighted class mean of each metric, and the count of excluded classes.

    With ``skip_absent`` a class without actual windows (TP + FN = 0) is
    excluded from every metric.
    """
    means, excluded = {}, {}
    for name in METRIC_NAMES:
        vals = []
        for met in per_class.values():
            if skip_absent and met.tp + met.fn == 0:
                continue
            v = getattr(met, name)
            if v is not None:
                vals.append(v)
        means[name] = float(np.mean(vals)) if vals else None
        excluded[name] = len(per_class) - len(vals)
    return means, excluded


# ---------------------------------------------------------------------------
# aggregation over folds


@dataclass
class FoldResult:
    fold: Fold
    confusion: ConfusionMatrix
    extra: dict = field(default_factory=dict)

    @property
    def per_class(self) -> dict[str, Metrics]:
        return all_class_metrics(self.confusion)

    @property
    def accuracy(self) -> float | None:
        return self.confusion.accuracy()


@dataclass
class AggregateReport:
    classes: tuple[str, ...]
    summed: ConfusionMatrix
    mean_confusion: np.ndarray
    headline: dict
    per_class: dict[str, dict]
    exclusions: dict
    aggregations: dict
    n_folds: int

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "n_folds": self.n_folds,
            "summed_confusion": self.summed.counts.tolist(),
            "mean_confusion": self.mean_confusion.tolist(),
            "headline": self.headline,
            "per_class": self.per_class,
            "exclusions": self.exclusions,
            "aggregations": self.aggregations,
        }


def aggregate(folds: Sequence[ConfusionMatrix | FoldResult]) -> AggregateReport:
    """Combine fold confusions into one report.

    Headline ``acc`` is the mean over folds of each fold's overall accuracy;
    the other headline metrics are the unweighted class mean of per-class
    fold means, where a fold without windows of a class skips that class.
    Window-pooled and volunteer-level variants are reported under
    ``aggregations``.
    """
    mats = [f.confusion if isinstance(f, FoldResult) else f for f in folds]
    if not mats:
        raise ValueError("no folds to aggregate")
    classes = mats[0].classes
    for m in mats[1:]:
        if m.classes != classes:
            raise ClassMismatch("folds do not share the class list")
    summed = mats[0]
    for m in mats[1:]:
        summed = summed + m
    per_fold = [all_class_metrics(m) for m in mats]

    per_class: dict[str, dict] = {}
    skipped_folds: dict[str, int] = {}
    for c in classes:
        row = {}
        present = [pf[c] for pf in per_fold if pf[c].tp + pf[c].fn > 0]
        skipped_folds[c] = len(mats) - len(present)
        for name in METRIC_NAMES:
            vals = [getattr(met, name) for met in present if getattr(met, name) is not None]
            row[name] = float(np.mean(vals)) if vals else None
        per_class[c] = row

    headline, excluded = {}, {}
    for name in METRIC_NAMES:
        vals = [per_class[c][name] for c in classes if per_class[c][name] is not None]
        headline[name] = float(np.mean(vals)) if vals else None
        excluded[name] = len(classes) - len(vals)
    headline["acc_class_macro"] = headline["acc"]
    fold_acc = [m.accuracy() for m in mats if m.accuracy() is not None]
    headline["acc"] = float(np.mean(fold_acc)) if fold_acc else None

    pooled, pooled_excl = macro_average(all_class_metrics(summed))
    pooled["overall_accuracy"] = summed.accuracy()
    volunteer_level = {}
    for name in METRIC_NAMES:
        vals = [macro_average(pf)[0][name] for pf in per_fold]
        vals = [v for v in vals if v is not None]
        volunteer_level[name] = float(np.mean(vals)) if vals else None
    volunteer_level["overall_accuracy"] = headline["acc"]

    return AggregateReport(
        classes=classes,
        summed=summed,
        mean_confusion=summed.counts / len(mats),
        headline=headline,
        per_class=per_class,
        exclusions={"classes_excluded_per_metric": excluded, "folds_without_class": skipped_folds,
                    "pooled_classes_excluded": pooled_excl},
        aggregations={"class_then_fold": dict(headline), "window_pooled": pooled,
                      "volunteer_level": volunteer_level, "fold_accuracies": [m.accuracy() for m in mats]},
        n_folds=len(mats),
    )


# ---------------------------------------------------------------------------
# quadrant analysis of single-step (19-class) confusions


def quadrant_analysis(m: ConfusionMatrix) -> dict[str, int]:
    """Split off-diagonal mass into the four correct/wrong quadrants.

    Q1: actual correct, predicted another correct class (misrecognition).
    Q2: actual correct, predicted wrong. Q3: actual wrong, predicted correct.
    Q4: actual wrong, predicted another wrong class.
    Within Q2/Q3 a cell pairing the same exercise (X-C <-> X-W) is an
    evaluation error; every other off-diagonal cell is a recognition error.
    """
    try:
        decoded = [decode_reev(c) for c in m.classes]
    except Exception as exc:
        raise SchemeMismatch(f"not a single-step class list: {m.classes}") from exc
    is_wrong = np.array([p.value == "W" for _, p in decoded])
    n_correct = int((~is_wrong).sum())
    if is_wrong[:n_correct].any() or not is_wrong[n_correct:].all():
        raise SchemeMismatch("classes must list the correct block before the wrong block")
    ex = [e for e, _ in decoded]
    c = m.counts
    out = {k: 0 for k in ("q1_misrecognitions", "q2_correct_as_wrong", "q2_evaluation_errors",
                          "q2_recognition_errors", "q3_wrong_as_correct", "q3_evaluation_errors",
                          "q3_recognition_errors", "q4_wrong_misrecognitions")}
    for i in range(len(ex)):
        for j in range(len(ex)):
            if i == j or c[i, j] == 0:
                continue
            v = int(c[i, j])
            same = ex[i] == ex[j]
            if not is_wrong[i] and not is_wrong[j]:
                out["q1_misrecognitions"] += v
            elif not is_wrong[i]:
                out["q2_correct_as_wrong"] += v
                out["q2_evaluation_errors" if same else "q2_recognition_errors"] += v
            elif not is_wrong[j]:
                out["q3_wrong_as_correct"] += v
                out["q3_evaluation_errors" if same else "q3_recognition_errors"] += v
            else:
                out["q4_wrong_misrecognitions"] += v
    out["evaluation_errors"] = out["q2_evaluation_errors"] + out["q3_evaluation_errors"]
    out["recognition_errors"] = (out["q1_misrecognitions"] + out["q2_recognition_errors"]
                                 + out["q3_recognition_errors"] + out["q4_wrong_misrecognitions"])
    out["off_diagonal_total"] = int(c.sum() - np.trace(c))
    return out


def write_confusion_csv(m: ConfusionMatrix | tuple[Sequence[str], np.ndarray], path: str | os.PathLike,
                        fmt: str = "%d") -> Path:
    """Delimited matrix with the class labels as header row and first column."""
    classes, counts = (m.classes, m.counts) if isinstance(m, ConfusionMatrix) else m
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["actual\\predicted"] + list(classes))
        for c, row in zip(classes, np.asarray(counts)):
            w.writerow([c] + [fmt % v for v in row])
    return path


def read_confusion_csv(path: str | os.PathLike) -> ConfusionMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    classes = rows[0][1:]
    counts = np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64)
    return ConfusionMatrix(tuple(classes), counts)


def binary_metrics_table(truth: Iterable[str], preds: Iterable[str]) -> dict:
    """Correct/wrong evaluation metrics: overall accuracy plus C/W class means."""
    m = confusion(list(truth), list(preds), ("C", "W"))
    means, _ = macro_average(all_class_metrics(m), skip_absent=False)
    means["acc"] = m.accuracy()
    return {"confusion": m.counts.tolist(), **means}
