"""Run the full comparison grid on the public dataset.

    python3 scripts/reproduce_tables.py /path/to/dataset --adapter zenodo --out runs/tables --jobs 4

Produces, for W in 100/200/300:
  * single-step 19-class results (ReEv) for every algorithm,
  * single-step 12-class results (ReCW) for every algorithm,
  * two-stage recognizer results and the per-exercise evaluator block.
Feature dumps are cached under ``<out>/cache`` keyed by dataset hash and
window size, so reruns skip feature extraction.
"""

import argparse
from pathlib import Path

from exercise_eval.classifiers import ALGO_KINDS
from exercise_eval.cli import cmd_compare
from exercise_eval.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("data")
    ap.add_argument("--adapter", default="zenodo", choices=("zenodo", "canonical"))
    ap.add_argument("--algos", nargs="+", default=list(ALGO_KINDS))
    ap.add_argument("--windows", nargs="+", type=int, default=[100, 200, 300])
    ap.add_argument("--pipelines", nargs="+", default=["ReEv", "ReCW", "TwoStage"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/tables"))
    args = ap.parse_args()

    config = RunConfig(data=args.data, adapter=args.adapter, windows=tuple(args.windows),
                       pipelines=tuple(args.pipelines), algos=tuple(args.algos), seed=args.seed,
                       out=str(args.out), jobs=args.jobs, cache_dir=str(args.out / "cache"))
    cmd_compare(config)


if __name__ == "__main__":
    main()
