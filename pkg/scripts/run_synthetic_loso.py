"""LOSO over a generated dataset for every pipeline and algorithm.

    python3 scripts/run_synthetic_loso.py --volunteers 8 --noise 0.5 --window 100 --out runs/synth

Writes one report per (pipeline, algorithm) and prints a table with the
headline metrics. Useful as a quick sanity check of the whole stack.
"""

import argparse
import json
import time
from pathlib import Path

from exercise_eval.classifiers import ALGO_KINDS, AlgoConfig
from exercise_eval.experiment import headline_row, run_loso, write_report
from exercise_eval.features import featurize
from exercise_eval.synthetic import SynthConfig, synth_generate


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--volunteers", type=int, default=8)
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--jitter", type=float, default=0.0, help="per-volunteer amplitude jitter")
    ap.add_argument("--window", type=int, default=100, choices=(100, 200, 300))
    ap.add_argument("--pipelines", nargs="+", default=["ReEv", "ReCW", "TwoStage"])
    ap.add_argument("--algos", nargs="+", default=list(ALGO_KINDS))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/synth"))
    args = ap.parse_args()

    cfg = SynthConfig(n_volunteers=args.volunteers, noise_std=args.noise, volunteer_jitter=args.jitter)
    table = featurize(synth_generate(cfg, seed=args.seed), args.window)
    print(f"{len(table)} windows from {args.volunteers} volunteers (W={args.window})")
    rows = []
    for pipeline in args.pipelines:
        for algo in args.algos:
            t0 = time.perf_counter()
            report = run_loso(table, pipeline, AlgoConfig(algo), seed=args.seed, jobs=args.jobs)
            write_report(report, args.out, f"{pipeline}_{AlgoConfig(algo).cli_name}")
            row = headline_row(report)
            row["seconds"] = round(time.perf_counter() - t0, 1)
            rows.append(row)
            print(f"{pipeline:<9} {row['algo']:<6} acc {row['acc']:6.2f}  f1 {row['f1']:6.2f}  "
                  f"spec {row['spec']:6.2f}  ({row['seconds']} s)")
    (args.out / "summary.json").write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
