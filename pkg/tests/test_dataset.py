"""Tests for recordings, validation, slicing and the on-disk layouts."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exercise_eval import dataset as ds
from exercise_eval.dataset import Exercise, ExerciseSeries, Performance, SensorStream, SessionRecording
from exercise_eval.errors import (DatasetFormatError, LabelOutOfBounds, MissingStream, RateAnomaly,
                                  SeriesNotInRecording)
from exercise_eval.zenodo import load_zenodo


def make_recording(n=400, series=None, rate=100.0, n_streams=4, t0=0.0):
    t = t0 + np.arange(n) / rate
    streams = []
    for slot in range(1, n_streams + 1):
        gyro = np.column_stack([np.sin(t * slot), np.cos(t), t]) * 10
        accel = np.column_stack([np.ones(n), np.zeros(n), 0.1 * np.sin(t)])
        streams.append(SensorStream(slot, t, gyro, accel, placement=f"IMU{slot}"))
    if series is None:
        series = (ExerciseSeries("KFL", "C", 0, 150), ExerciseSeries("KFL", "W", 200, 390))
    return SessionRecording("V01", tuple(streams), tuple(series))


def codes(rec):
    return sorted(v.code for v in ds.validate_recording(rec))


def test_valid_recording_has_no_violations():
    assert ds.validate_recording(make_recording()) == []


def test_synthetic_dataset_validates(synth_recordings):
    assert all(ds.validate_recording(r) == [] for r in synth_recordings)


def test_missing_stream_is_reported():
    assert "stream_count" in codes(make_recording(n_streams=3))


def test_rate_anomaly_is_reported():
    assert "rate" in codes(make_recording(rate=90.0))


def test_rate_within_tolerance_passes():
    assert "rate" not in codes(make_recording(rate=104.0))


def test_negative_timestamp_is_reported():
    assert "timestamp" in codes(make_recording(t0=-1.0))


def test_overlapping_series_name_both():
    a, b = ExerciseSeries("SQT", "C", 0, 200), ExerciseSeries("SQT", "W", 150, 300)
    violations = [v for v in ds.validate_recording(make_recording(series=(a, b))) if v.code == "series_overlap"]
    assert len(violations) == 1
    assert a.tag in violations[0].message and b.tag in violations[0].message


def test_series_out_of_bounds():
    assert "series_bounds" in codes(make_recording(series=(ExerciseSeries("SQT", "C", 100, 500),)))


def test_ght_wrong_is_a_violation():
    assert "ght_wrong" in codes(make_recording(series=(ExerciseSeries("GHT", "W", 0, 100),)))


def test_out_of_range_values():
    rec = make_recording()
    s = rec.streams[0]
    bad = SensorStream(1, s.t, s.gyro + 5000.0, s.accel)
    rec2 = SessionRecording("V01", (bad,) + rec.streams[1:], rec.series)
    assert "range" in codes(rec2)


def test_arrays_are_read_only():
    s = make_recording().streams[0]
    with pytest.raises(ValueError):
        s.gyro[0, 0] = 1.0


def test_slice_series_shape_and_content():
    rec = make_recording()
    ser = rec.series[0]
    seg = ds.slice_series(rec, ser)
    assert seg.shape == (24, len(ser))
    np.testing.assert_array_equal(seg[:6].T, rec.streams[0].signals()[ser.start_sample:ser.end_sample])
    np.testing.assert_array_equal(seg[18:].T, rec.streams[3].signals()[ser.start_sample:ser.end_sample])


def test_slice_foreign_series_raises():
    with pytest.raises(SeriesNotInRecording):
        ds.slice_series(make_recording(), ExerciseSeries("EAH", "C", 0, 10))


@given(st.integers(0, 300), st.integers(1, 100))
def test_slice_length_matches_series(start, length):
    ser = ExerciseSeries("HAL", "C", start, start + length)
    rec = make_recording(series=(ser,))
    assert ds.slice_series(rec, ser).shape == (24, length)


def test_ingest_label_maps_wrong_heel_tiptoe_to_wrong_gait():
    assert ds.ingest_label("GHT", "W") == (Exercise.GAT, Performance.W)
    assert ds.ingest_label("GHT", "C") == (Exercise.GHT, Performance.C)
    assert ds.ingest_label("KFR", "W") == (Exercise.KFR, Performance.W)


def test_limb_groups():
    upper = {e for e in Exercise if e.limb_group is ds.LimbGroup.UPPER}
    assert upper == {Exercise.SQZ, Exercise.EFE, Exercise.EAH}
    assert not Exercise.GHT.has_wrong_variant
    assert sum(e.has_wrong_variant for e in Exercise) == 9


def test_canonical_round_trip(tmp_path, small_recordings):
    ds.write_canonical(small_recordings, tmp_path)
    loaded = ds.load_dataset(tmp_path)
    assert loaded == small_recordings


def test_canonical_round_trip_parallel(tmp_path, small_recordings):
    ds.write_canonical(small_recordings, tmp_path)
    assert ds.load_dataset(tmp_path, jobs=2) == small_recordings


def test_missing_imu_file_raises(tmp_path):
    ds.write_canonical([make_recording()], tmp_path)
    (tmp_path / "V01" / "imu3.csv").unlink()
    with pytest.raises(MissingStream):
        ds.load_dataset(tmp_path)


def test_label_out_of_bounds_raises(tmp_path):
    rec = make_recording()
    ds.write_canonical([rec], tmp_path)
    (tmp_path / "V01" / "labels.csv").write_text(
        "volunteer_id,exercise,performance,start_sample,end_sample\nV01,KFL,C,0,999\n")
    with pytest.raises(LabelOutOfBounds):
        ds.load_dataset(tmp_path)


def test_rate_anomaly_raises(tmp_path):
    ds.write_canonical([make_recording(rate=80.0)], tmp_path)
    with pytest.raises(RateAnomaly):
        ds.load_dataset(tmp_path)


def test_label_file_ght_wrong_is_relabeled(tmp_path):
    ds.write_canonical([make_recording()], tmp_path)
    (tmp_path / "V01" / "labels.csv").write_text(
        "volunteer_id,exercise,performance,start_sample,end_sample\nV01,GHT,W,0,100\n")
    rec = ds.load_dataset(tmp_path)[0]
    assert rec.series[0].exercise is Exercise.GAT and rec.series[0].performance is Performance.W


def test_bad_header_raises(tmp_path):
    ds.write_canonical([make_recording()], tmp_path)
    (tmp_path / "V01" / "imu1.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DatasetFormatError):
        ds.load_dataset(tmp_path)


def test_unknown_adapter(tmp_path):
    with pytest.raises(ValueError):
        ds.load_dataset(tmp_path, adapter="other")


def _write_ngimu(path, n, seed):
    r = np.random.default_rng(seed)
    t = np.arange(n) / 100.0
    cols = ["Time (s)", "Gyroscope X (deg/s)", "Gyroscope Y (deg/s)", "Gyroscope Z (deg/s)",
            "Accelerometer X (g)", "Accelerometer Y (g)", "Accelerometer Z (g)", "Magnetometer X (uT)"]
    data = np.column_stack([t, r.normal(size=(n, 3)) * 20, r.normal(size=(n, 3)) * 0.2, r.normal(size=n)])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="")
    return data


def test_zenodo_adapter_concatenates_series(tmp_path):
    vdir = tmp_path / "V07"
    sizes = {"KFL_correct_1": 120, "GHT_wrong_1": 90, "SQZ_C_2": 150}
    first = {}
    for k, (name, n) in enumerate(sizes.items()):
        (vdir / name).mkdir(parents=True)
        for imu in range(1, 5):
            d = _write_ngimu(vdir / name / f"imu{imu}.csv", n, seed=10 * k + imu)
            if imu == 1:
                first[name] = d
    rec = load_zenodo(tmp_path)[0]
    assert [(s.exercise.value, s.performance.value, len(s)) for s in rec.series] == [
        ("GAT", "W", 90), ("KFL", "C", 120), ("SQZ", "C", 150)]
    assert rec.n_samples == 360
    assert np.all(np.diff(rec.streams[0].t) > 0)
    np.testing.assert_allclose(rec.streams[0].gyro[:90], first["GHT_wrong_1"][:, 1:4])
    assert ds.validate_recording(rec) == []


def test_frozen_series():
    with pytest.raises(dataclasses.FrozenInstanceError):
        ExerciseSeries("KFL", "C", 0, 10).start_sample = 3
