"""End-to-end tests of the experiment runner and the command line."""

import json

import numpy as np
import pytest
import yaml

from exercise_eval.cli import main
from exercise_eval.config import RunConfig
from exercise_eval.dataset import load_dataset
from exercise_eval.errors import InvalidConfig
from exercise_eval.experiment import cached_features, run_loso
from exercise_eval.features import read_feature_dump
from exercise_eval.synthetic import SynthConfig, synth_generate


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(root), "--volunteers", "7", "--seed", "1"]) == 0
    return root


def small_synth_config(path):
    cfg = {"n_volunteers": 7, "exercises": ["KFL", "SQZ", "GHT", "GAT"], "reps": 1, "series_per_class": 2}
    path.write_text(yaml.safe_dump({"synth": cfg, "seed": 2}))
    return path


def test_synth_round_trip(tmp_path):
    cfg_path = small_synth_config(tmp_path / "run.yaml")
    out = tmp_path / "data"
    assert main(["synth", "--config", str(cfg_path), "--out", str(out)]) == 0
    loaded = load_dataset(out)
    expected = synth_generate(SynthConfig.from_mapping(yaml.safe_load(cfg_path.read_text())["synth"]), 2)
    assert loaded == expected


def test_featurize_rows_and_determinism(tmp_path, data_dir):
    for sub in ("a", "b"):
        assert main(["featurize", "--data", str(data_dir), "--window", "100", "300", "--out",
                     str(tmp_path / sub)]) == 0
    a = (tmp_path / "a" / "features_W100.csv").read_bytes()
    assert a == (tmp_path / "b" / "features_W100.csv").read_bytes()
    recs = load_dataset(data_dir)
    expected = sum((len(s) - 100) // 50 + 1 for r in recs for s in r.series if len(s) >= 100)
    assert len(read_feature_dump(tmp_path / "a" / "features_W100.csv", 100)) == expected
    summary = json.loads((tmp_path / "a" / "featurize_summary.json").read_text())
    assert summary["100"]["n_windows"] == expected
    manifest = json.loads((tmp_path / "a" / "run_manifest.json").read_text())
    assert len(manifest["dataset_hash"]) == 64


@pytest.mark.parametrize("pipeline", ["reev", "recw", "two-stage"])
def test_loso_report(tmp_path, data_dir, pipeline):
    out = tmp_path / "r"
    args = ["loso", "--data", str(data_dir), "--window", "200", "--pipeline", pipeline, "--algo", "knn",
            "--out", str(out)]
    assert main(args) == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["folds"]) == 7
    assert report["aggregate"]["headline"]["acc"] >= 99.0
    summed = np.sum([f["confusion"]["counts"] for f in report["folds"]], axis=0)
    assert summed.tolist() == report["aggregate"]["summed_confusion"]
    assert (out / "report_confusion_sum.csv").exists()
    first = (out / "report.json").read_bytes()
    assert main(args) == 0
    assert (out / "report.json").read_bytes() == first


def test_loso_two_stage_sections(tmp_path, data_dir):
    out = tmp_path / "r"
    assert main(["loso", "--data", str(data_dir), "--window", "300", "--pipeline", "two-stage",
                 "--algo", "svm-l", "--stage2-candidates", "svm-l", "knn", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["stage2"]) == 9
    assert all(c["end_to_end"] <= c["stage1"] for c in report["composition_check"])
    assert all(f["stage2_selection"] for f in report["folds"])


def test_compare_rows(tmp_path, data_dir):
    out = tmp_path / "cmp"
    assert main(["compare", "--data", str(data_dir), "--pipeline", "reev", "recw", "--algo", "knn",
                 "--window", "100", "200", "300", "--out", str(out), "--cache-dir", str(tmp_path / "cache")]) == 0
    table = json.loads((out / "comparison.json").read_text())
    assert len(table["rows"]) == 6
    assert len(list((tmp_path / "cache").glob("features_*_W*.csv"))) == 3


def test_compare_two_stage_block(tmp_path, data_dir):
    out = tmp_path / "cmp"
    assert main(["compare", "--data", str(data_dir), "--pipeline", "two-stage", "two-stage", "--algo", "knn",
                 "--window", "300", "--out", str(out)]) == 0
    table = json.loads((out / "comparison.json").read_text())
    assert table["rows"][0] == table["rows"][1]
    assert len([k for k in table["stage2_per_exercise"][0] if k.isupper() and len(k) == 3]) == 9


def test_exit_codes(tmp_path):
    assert main(["loso", "--data", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["loso", "--window", "150"])
    assert exc.value.code == 2
    assert main(["compare", "--data", str(tmp_path), "--out", str(tmp_path / "o")]) == 1


def test_too_few_volunteers_is_an_error(tmp_path):
    root = tmp_path / "d"
    assert main(["synth", "--out", str(root), "--volunteers", "3"]) == 0
    assert main(["loso", "--data", str(root), "--window", "100", "--out", str(tmp_path / "o")]) == 1


def test_config_file_overridden_by_flags(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"window": 100, "pipeline": "recw", "algo": "elm", "seed": 5}))
    from exercise_eval.cli import build_parser, config_from_args

    cfg = config_from_args(build_parser().parse_args(["loso", "--config", str(path), "--window", "300",
                                                      "--no-standardize"]))
    assert cfg.windows == (300,) and cfg.pipelines == ("ReCW",) and cfg.algos == ("ELM",)
    assert cfg.seed == 5 and cfg.standardize is False


def test_run_config_validation():
    with pytest.raises(InvalidConfig):
        RunConfig(windows=(150,))
    with pytest.raises(InvalidConfig):
        RunConfig.from_mapping({"colour": "red"})
    cfg = RunConfig(algos=("knn",), hyperparams={"KNN": {"k": 3}})
    assert cfg.algo_config("KNN").hyperparams["k"] == 3
    assert RunConfig.from_mapping(cfg.to_dict()) == cfg


def test_parallel_folds_match_serial(data_dir):
    table, _ = cached_features(data_dir, 300)
    a = run_loso(table, "ReEv", "KNN", jobs=1)
    b = run_loso(table, "ReEv", "KNN", jobs=2)
    assert json.dumps(a, sort_keys=True, default=str) == json.dumps(b, sort_keys=True, default=str)
