"""LOSO experiment runner: standardize, tune, fit, predict and score every fold.

Each fold is independent. With ``jobs > 1`` folds run in worker processes;
results are merged in fold order so reports do not depend on completion
order.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import AlgoConfig
from .errors import ExerciseEvalError
from .evaluation import (Fold, aggregate, all_class_metrics, confusion, plan_loso, quadrant_analysis,
                         write_confusion_csv)
from .features import FeatureTable, featurize, fit_standardizer, read_feature_dump, write_feature_dump
from .labels import EVALUATED_EXERCISES, EXERCISE_ORDER, LabelScheme, make_labels, scheme_classes
from .pipelines import (PipelineKind, fit_pipeline, predict_batch, select_stage2_algos,
                        stage2_validation_results, truth_labels)


class FoldError(ExerciseEvalError):
    """A failure inside one LOSO fold; the message names the fold."""


# ---------------------------------------------------------------------------
# dataset hashing and the feature cache


def dataset_hash(root: str | os.PathLike) -> str:
    """SHA-256 over relative paths and bytes of every file under ``root``."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(b"\0")
        h.update(p.read_bytes())
    return h.hexdigest()


def cached_features(root: str | os.PathLike, window: int, adapter: str = "canonical",
                    cache_dir: str | os.PathLike | None = None, jobs: int = 1,
                    recordings=None) -> tuple[FeatureTable, str]:
    """Feature table for ``root`` at ``window``, re-using a dump keyed by (dataset hash, window)."""
    from .dataset import load_dataset

    digest = dataset_hash(root)
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"features_{digest[:16]}_W{window}.csv"
        drops = path.with_suffix(".drops.json")
        if path.exists() and drops.exists():
            table = read_feature_dump(path, window)
            table.dropped_series = json.loads(drops.read_text(encoding="utf-8"))
            return table, digest
    recs = recordings if recordings is not None else load_dataset(root, adapter, jobs=jobs)
    table = featurize(recs, window)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_feature_dump(table, path)
        path.with_suffix(".drops.json").write_text(json.dumps(table.dropped_series, sort_keys=True),
                                                   encoding="utf-8")
    return table, digest


# ---------------------------------------------------------------------------
# one fold


@dataclass(frozen=True)
class FoldSpec:
    kind: str
    algo: AlgoConfig
    standardize: bool
    seed: int
    tune: bool
    stage2_candidates: tuple[AlgoConfig, ...] = ()


def _present(exercises: np.ndarray) -> tuple[str, ...]:
    have = set(map(str, exercises))
    return tuple(e.value for e in EXERCISE_ORDER if e.value in have)


def run_fold(table: FeatureTable, fold: Fold, spec: FoldSpec) -> dict:
    """Train on the fold's training volunteers and score its test volunteer."""
    kind = PipelineKind.parse(spec.kind)
    tr = table.for_volunteers(fold.train_volunteers)
    va = table.for_volunteers(fold.validation_volunteers)
    te = table.for_volunteers([fold.test_volunteer])
    std = None
    if spec.standardize:
        std = fit_standardizer(tr.X)
        tr, va, te = (t.subset(slice(None)) for t in (tr, va, te))
        tr.X, va.X, te.X = std.apply(tr.X), std.apply(va.X), std.apply(te.X)
    exercises = _present(table.exercises)
    stage2 = None
    selection = None
    if kind is PipelineKind.TWO_STAGE and len(spec.stage2_candidates) > 1:
        results = stage2_validation_results(spec.stage2_candidates, tr, va, seed=spec.seed)
        evaluated = [e.value for e in EVALUATED_EXERCISES if e.value in results]
        stage2 = select_stage2_algos(list(spec.stage2_candidates), results, evaluated)
        selection = {ex: cfg.kind for ex, cfg in stage2.items()}
    elif kind is PipelineKind.TWO_STAGE and spec.stage2_candidates:
        stage2 = spec.stage2_candidates[0]
    try:
        model = fit_pipeline(kind, spec.algo, tr, va, seed=spec.seed, stage2_algo=stage2, exercises=exercises,
                             standardizer=std, do_tune=spec.tune)
    except ExerciseEvalError as exc:
        raise FoldError(f"fold {fold.index} (test volunteer {fold.test_volunteer}): {exc}") from exc

    pred = predict_batch(model, te.X)
    truth = truth_labels(kind, te)
    classes = list(model.classes)
    out = {
        "index": fold.index,
        "test_volunteer": fold.test_volunteer,
        "validation_volunteers": list(fold.validation_volunteers),
        "train_volunteers": list(fold.train_volunteers),
        "n_test_windows": int(len(te)),
        "confusion": confusion(list(truth), list(pred.native), classes),
        "fit_info": model.info,
    }
    if kind is PipelineKind.TWO_STAGE:
        reev_classes = scheme_classes(LabelScheme.REEV, exercises)
        joint_truth = make_labels(LabelScheme.REEV, te.exercises, te.performances)
        out["end_to_end"] = confusion(list(joint_truth), [d.joint_label for d in pred.decisions], reev_classes)
        # stage-2 evaluators scored on ground-truth exercise windows
        stage2_conf = {}
        for ex, evaluator in model.evaluators.items():
            rows = np.flatnonzero(np.asarray(te.exercises, dtype=object) == ex)
            y = make_labels(LabelScheme.STAGE2, te.exercises[rows], te.performances[rows])
            p = evaluator.predict_batch(te.X[rows]) if len(rows) else np.empty(0, dtype=object)
            stage2_conf[ex] = confusion(list(y), list(p), ("C", "W"))
        out["stage2"] = stage2_conf
        out["stage2_selection"] = selection
    return out


def _run_fold_star(args):
    return run_fold(*args)


# ---------------------------------------------------------------------------
# whole LOSO run


def _conf_dict(m) -> dict:
    return {"classes": list(m.classes), "counts": m.counts.tolist()}


def _metrics_dict(m) -> dict:
    return {c: met.as_dict() for c, met in all_class_metrics(m).items()}


def run_loso(table: FeatureTable, kind: str, algo: AlgoConfig | str, standardize: bool = True, seed: int = 0,
             loso_seed: int | None = None, tune: bool = True, jobs: int = 1,
             stage2_candidates: Sequence[AlgoConfig | str] = ()) -> dict:
    """Full LOSO evaluation; returns a JSON-ready report payload (no timestamps)."""
    kind = PipelineKind.parse(kind).value
    algo = algo if isinstance(algo, AlgoConfig) else AlgoConfig(algo)
    cands = tuple(c if isinstance(c, AlgoConfig) else AlgoConfig(c) for c in stage2_candidates)
    plan = plan_loso(sorted(set(map(str, table.volunteer_ids))), seed=loso_seed)
    spec = FoldSpec(kind, algo, standardize, seed, tune, cands)
    args = [(table, f, spec) for f in plan.folds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(_run_fold_star, args))
    else:
        folds = [run_fold(*a) for a in args]
    folds.sort(key=lambda f: f["index"])

    agg = aggregate([f["confusion"] for f in folds])
    report: dict = {
        "config": {"pipeline": kind, "algo": algo.to_dict(), "window_size": table.window_size,
                   "standardize": standardize, "seed": seed, "loso_seed": loso_seed, "tune": tune,
                   "stage2_candidates": [c.kind for c in cands]},
        "n_windows": int(len(table)),
        "dropped_series": list(table.dropped_series),
        "aggregate": agg.to_dict(),
        "folds": [],
        "warnings": [],
    }
    for f in folds:
        entry = {k: v for k, v in f.items() if k not in ("confusion", "end_to_end", "stage2")}
        entry["confusion"] = _conf_dict(f["confusion"])
        entry["accuracy"] = f["confusion"].accuracy()
        entry["per_class"] = _metrics_dict(f["confusion"])
        if "end_to_end" in f:
            entry["end_to_end_confusion"] = _conf_dict(f["end_to_end"])
            entry["end_to_end_accuracy"] = f["end_to_end"].accuracy()
            entry["stage2_confusions"] = {ex: _conf_dict(m) for ex, m in f["stage2"].items()}
        report["folds"].append(entry)

    if kind == PipelineKind.REEV.value:
        report["quadrants"] = quadrant_analysis(agg.summed)
    if kind == PipelineKind.TWO_STAGE.value:
        e2e = aggregate([f["end_to_end"] for f in folds])
        report["end_to_end"] = e2e.to_dict()
        report["quadrants"] = quadrant_analysis(e2e.summed)
        per_ex = {}
        for ex in (e.value for e in EVALUATED_EXERCISES):
            mats = [f["stage2"][ex] for f in folds if ex in f["stage2"]]
            if mats:
                per_ex[ex] = aggregate(mats).to_dict()
        report["stage2"] = per_ex
        accs = [v["headline"]["acc"] for v in per_ex.values() if v["headline"]["acc"] is not None]
        report["stage2_macro_accuracy"] = float(np.mean(accs)) if accs else None
        report["composition_check"] = [
            {"fold": f["index"], "stage1": f["confusion"].accuracy(), "end_to_end": f["end_to_end"].accuracy()}
            for f in folds]
    report["warnings"] = collect_warnings(report)
    return report


def collect_warnings(report: dict) -> list[str]:
    w = []
    for d in report.get("dropped_series", []):
        w.append(f"dropped series {d['volunteer_id']} {d['exercise']}-{d['performance']} "
                 f"({d['length']} samples < window)")
    for f in report["folds"]:
        pools = (f.get("fit_info") or {}).get("pools")
        if pools:
            for lab, under in pools["undersized"].items():
                if under:
                    w.append(f"fold {f['index']}: {lab} pool smaller than target "
                             f"({pools['pool_sizes'][lab]} < {pools['targets'][lab]})")
    excl = report["aggregate"]["exclusions"]["classes_excluded_per_metric"]
    for name, n in sorted(excl.items()):
        if n:
            w.append(f"{name}: {n} class(es) with undefined values excluded from the headline mean")
    return w


def headline_row(report: dict) -> dict:
    """Table-style row: acc / f1 / prec / sens / spec of the headline aggregate."""
    h = report["aggregate"]["headline"]
    cfg = report["config"]
    return {"pipeline": cfg["pipeline"], "algo": cfg["algo"]["kind"], "window": cfg["window_size"],
            **{k: h[k] for k in ("acc", "f1", "prec", "sens", "spec")}}


def write_report(report: dict, out_dir: str | os.PathLike, stem: str = "report") -> list[Path]:
    """Write the JSON payload plus delimited confusion matrices."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.json"]
    paths[0].write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n",
                        encoding="utf-8")
    agg = report["aggregate"]
    paths.append(write_confusion_csv((agg["classes"], np.asarray(agg["summed_confusion"])),
                                     out / f"{stem}_confusion_sum.csv"))
    paths.append(write_confusion_csv((agg["classes"], np.asarray(agg["mean_confusion"])),
                                     out / f"{stem}_confusion_mean.csv", fmt="%.6f"))
    if "end_to_end" in report:
        e2e = report["end_to_end"]
        paths.append(write_confusion_csv((e2e["classes"], np.asarray(e2e["summed_confusion"])),
                                         out / f"{stem}_end_to_end_confusion_sum.csv"))
    return paths


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
