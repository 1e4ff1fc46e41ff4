"""Command-line entry point: ``exercise-eval {synth,featurize,loso,compare}``.

Values from ``--config FILE`` (YAML) are overridden by explicit flags.
Exit status is 0 on success, 1 on a data/model error and 2 on a usage
error. Every report directory gets a ``run_manifest.json`` with the
configuration, dataset hash and library versions; timestamps live only
there, so report payloads are byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__
from .classifiers import ALGO_KINDS, AlgoConfig
from .config import ADAPTERS, RunConfig
from .dataset import load_dataset, validate_recording, write_canonical
from .errors import ExerciseEvalError
from .experiment import cached_features, dataset_hash, headline_row, run_loso, write_report
from .features import WINDOW_SIZES, write_feature_dump
from .synthetic import SynthConfig, synth_generate

PIPELINE_CHOICES = ("reev", "recw", "two-stage")
ALGO_CHOICES = tuple(k.lower().replace("_", "-") for k in ALGO_KINDS)
TABLE_COLUMNS = ("acc", "f1", "prec", "sens", "spec")


def _manifest(config: RunConfig, command: str, data_hash: str | None, outputs: Sequence[Path]) -> dict:
    return {
        "command": command,
        "config": config.to_dict(),
        "dataset_hash": data_hash,
        "outputs": sorted(p.name for p in outputs),
        "metadata": {
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "versions": {"exercise_eval": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
        },
    }


def _write_manifest(out: Path, manifest: dict) -> Path:
    path = out / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _require_data(config: RunConfig) -> str:
    if not config.data:
        raise ExerciseEvalError("no dataset given (use --data or set 'data' in the config file)")
    return config.data


# ---------------------------------------------------------------------------
# commands


def cmd_synth(config: RunConfig) -> Path:
    synth = SynthConfig.from_mapping(config.synth)
    recs = synth_generate(synth, seed=config.seed)
    for rec in recs:
        problems = validate_recording(rec)
        if problems:
            raise ExerciseEvalError(f"{rec.volunteer_id}: generated recording invalid: {problems[0]}")
    out = write_canonical(recs, config.out)
    print(f"wrote {len(recs)} synthetic volunteers to {out}")
    return out


def cmd_featurize(config: RunConfig) -> list[Path]:
    root = _require_data(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    recs = load_dataset(root, config.adapter, jobs=config.jobs)
    digest = dataset_hash(root)
    written = []
    summary = {}
    from .features import featurize

    for w in config.windows:
        table = featurize(recs, w)
        written.append(write_feature_dump(table, out / f"features_W{w}.csv"))
        summary[str(w)] = {"n_windows": len(table), "window_counts": table.window_counts(),
                           "dropped_series": table.dropped_series}
        print(f"W={w}: {len(table)} windows, {len(table.dropped_series)} series dropped")
    summ = out / "featurize_summary.json"
    summ.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(summ)
    written.append(_write_manifest(out, _manifest(config, "featurize", digest, written)))
    return written


def _loso_one(config: RunConfig, pipeline: str, algo: str, window: int) -> tuple[dict, str]:
    table, digest = cached_features(_require_data(config), window, config.adapter, config.cache_dir, config.jobs)
    cands = [config.algo_config(a) for a in config.stage2_candidates]
    report = run_loso(table, pipeline, config.algo_config(algo), standardize=config.standardize, seed=config.seed,
                      loso_seed=config.loso_seed, tune=config.tune, jobs=config.jobs, stage2_candidates=cands)
    return report, digest


def cmd_loso(config: RunConfig) -> dict:
    pipeline, algo, window = config.pipelines[0], config.algos[0], config.windows[0]
    report, digest = _loso_one(config, pipeline, algo, window)
    out = Path(config.out)
    paths = write_report(report, out)
    _write_manifest(out, _manifest(config, "loso", digest, paths))
    row = headline_row(report)
    print(_format_rows([row]))
    for w in report["warnings"]:
        print(f"warning: {w}")
    return report


def _format_rows(rows: list[dict]) -> str:
    head = f"{'pipeline':<10}{'algo':<7}{'W':>5}" + "".join(f"{c:>9}" for c in TABLE_COLUMNS)
    lines = [head]
    for r in rows:
        vals = "".join(f"{'-' if r[c] is None else format(r[c], '.2f'):>9}" for c in TABLE_COLUMNS)
        lines.append(f"{r['pipeline']:<10}{r['algo']:<7}{r['window']:>5}{vals}")
    return "\n".join(lines)


def cmd_compare(config: RunConfig) -> dict:
    """One LOSO run per (pipeline, algorithm, window) and a combined table."""
    grid = [(p, a, w) for p in config.pipelines for a in config.algos for w in config.windows]
    if len(grid) < 2:
        raise ExerciseEvalError("compare needs at least two configurations")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, stage2_rows, paths, digest = [], [], [], None
    for p, a, w in grid:
        report, digest = _loso_one(config, p, a, w)
        stem = f"{p}_{AlgoConfig(a).cli_name}_W{w}"
        paths += write_report(report, out / "runs", stem)
        rows.append(headline_row(report))
        if "stage2" in report:
            row = {"pipeline": p, "algo": AlgoConfig(a).kind, "window": w}
            row.update({ex: v["headline"]["acc"] for ex, v in report["stage2"].items()})
            row["mean"] = report["stage2_macro_accuracy"]
            stage2_rows.append(row)
    table = {"rows": rows, "stage2_per_exercise": stage2_rows}
    tpath = out / "comparison.json"
    tpath.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    cpath = out / "comparison.csv"
    with open(cpath, "w", encoding="utf-8") as fh:
        fh.write(",".join(("pipeline", "algo", "window") + TABLE_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join([r["pipeline"], r["algo"], str(r["window"])]
                              + ["" if r[c] is None else "%.6f" % r[c] for c in TABLE_COLUMNS]) + "\n")
    paths += [tpath, cpath]
    _write_manifest(out, _manifest(config, "compare", digest, paths))
    print(_format_rows(rows))
    return table


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exercise-eval",
                                     description="Exercise recognition and evaluation from four-IMU recordings.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi: bool):
        p.add_argument("--config", type=Path, help="YAML run configuration (flags override it)")
        p.add_argument("--data", help="dataset root directory")
        p.add_argument("--adapter", choices=ADAPTERS)
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        nargs = "+" if multi else None
        p.add_argument("--window", type=int, choices=WINDOW_SIZES, nargs=nargs)
        return p

    p = sub.add_parser("synth", help="write a synthetic dataset in the canonical layout")
    p.add_argument("--config", type=Path)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--volunteers", type=int, help="number of synthetic volunteers")
    p.add_argument("--noise", type=float, help="noise std relative to signal amplitude")

    common(sub.add_parser("featurize", help="write feature dumps"), multi=True)

    for name, multi in (("loso", False), ("compare", True)):
        p = common(sub.add_parser(name, help="LOSO evaluation" if not multi else "pipeline/algorithm grid"), multi)
        nargs = "+" if multi else None
        p.add_argument("--pipeline", choices=PIPELINE_CHOICES, nargs=nargs)
        p.add_argument("--algo", choices=ALGO_CHOICES, nargs=nargs)
        p.add_argument("--stage2-candidates", choices=ALGO_CHOICES, nargs="+",
                       help="TwoStage: choose the evaluator per exercise among these on validation")
        p.add_argument("--no-standardize", action="store_true")
        p.add_argument("--no-tune", action="store_true")
        p.add_argument("--loso-seed", type=int, help="permute the volunteer ordering of the LOSO plan")
        p.add_argument("--cache-dir", help="feature cache directory")
    return parser


def _as_list(v):
    if v is None:
        return None
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    kw = {
        "data": getattr(args, "data", None),
        "adapter": getattr(args, "adapter", None),
        "out": getattr(args, "out", None),
        "seed": getattr(args, "seed", None),
        "jobs": getattr(args, "jobs", None),
        "windows": _as_list(getattr(args, "window", None)),
        "pipelines": _as_list(getattr(args, "pipeline", None)),
        "algos": _as_list(getattr(args, "algo", None)),
        "stage2_candidates": _as_list(getattr(args, "stage2_candidates", None)),
        "loso_seed": getattr(args, "loso_seed", None),
        "cache_dir": getattr(args, "cache_dir", None),
    }
    if getattr(args, "no_standardize", False):
        kw["standardize"] = False
    if getattr(args, "no_tune", False):
        kw["tune"] = False
    synth = dict(base.synth)
    if getattr(args, "volunteers", None) is not None:
        synth["n_volunteers"] = args.volunteers
    if getattr(args, "noise", None) is not None:
        synth["noise_std"] = args.noise
    kw["synth"] = synth
    return base.override(**kw)


COMMANDS = {"synth": cmd_synth, "featurize": cmd_featurize, "loso": cmd_loso, "compare": cmd_compare}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        COMMANDS[args.command](config)
    except (ExerciseEvalError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
