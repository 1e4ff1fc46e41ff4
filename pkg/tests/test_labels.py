"""Tests for the labeling schemes and the balanced wrong-class pools."""

from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exercise_eval.dataset import LimbGroup
from exercise_eval.errors import InvalidCombination, MissingClass
from exercise_eval.labels import (EVALUATED_EXERCISES, EXERCISE_ORDER, LabelScheme, decode_reev, label_recw,
                                  label_reev, make_labels, sample_recw_wrong_pools, scheme_classes,
                                  size_recw_wrong_pools)

UPPER = [e.value for e in EXERCISE_ORDER if e.limb_group is LimbGroup.UPPER]
LOWER = [e.value for e in EXERCISE_ORDER if e.limb_group is LimbGroup.LOWER]


@pytest.mark.parametrize("scheme,n", [("ReEv", 19), ("ReCW", 12), ("Stage1", 10), ("Stage2", 2)])
def test_scheme_cardinalities(scheme, n):
    classes = scheme_classes(scheme)
    assert len(classes) == n == len(set(classes))


def test_reev_order_correct_block_first():
    classes = scheme_classes(LabelScheme.REEV)
    assert classes[:10] == ["EAH-C", "EFE-C", "SQZ-C", "GAT-C", "GHT", "HAL-C", "HAR-C", "KFL-C", "KFR-C", "SQT-C"]
    assert all(c.endswith("-W") for c in classes[10:])


def test_reev_round_trip():
    for lab in scheme_classes(LabelScheme.REEV):
        assert label_reev(*decode_reev(lab)) == lab


def test_ght_wrong_has_no_reev_label():
    with pytest.raises(InvalidCombination):
        label_reev("GHT", "W")


def test_recw_labels():
    assert label_recw("KFL", "C") == "KFL"
    assert label_recw("KFL", "W") == "WL"
    assert label_recw("EAH", "W") == "WU"
    assert scheme_classes(LabelScheme.RECW)[-2:] == ["WU", "WL"]


def test_make_labels_vectorized():
    ex = ["KFL", "EAH", "GHT"]
    perf = ["W", "C", "C"]
    assert list(make_labels("ReEv", ex, perf)) == ["KFL-W", "EAH-C", "GHT"]
    assert list(make_labels("ReCW", ex, perf)) == ["WL", "EAH", "GHT"]
    assert list(make_labels("Stage1", ex, perf)) == ex
    assert list(make_labels("Stage2", ex, perf)) == perf


def test_restricted_class_lists():
    assert scheme_classes("ReEv", ["KFL", "GHT"]) == ["GHT", "KFL-C", "KFL-W"]
    assert scheme_classes("ReCW", ["KFL"]) == ["KFL", "WL"]


def test_size_pools_examples():
    counts = {e.value: 10 for e in EXERCISE_ORDER}
    counts["EFE"] = 40
    counts["SQT"] = 55
    assert size_recw_wrong_pools(counts) == (80, 110)


def test_size_pools_missing_class():
    with pytest.raises(MissingClass):
        size_recw_wrong_pools({"KFL": 3})


@st.composite
def pool_scenario(draw):
    correct = {e.value: draw(st.integers(0, 60)) for e in EXERCISE_ORDER}
    wrong = {e.value: draw(st.integers(0, 150)) for e in EVALUATED_EXERCISES}
    return correct, wrong, draw(st.integers(0, 2**31 - 1))


def check_pools(correct, wrong, seed):
    """Independent count of the assembled training pools against the doubling rule."""
    sources = [ex for ex, n in wrong.items() for _ in range(n)]
    targets = size_recw_wrong_pools(correct)
    sel = sample_recw_wrong_pools(sources, targets, seed)
    picked = Counter(np.asarray(sources, dtype=object)[sel.indices])
    wu = sum(picked[e] for e in UPPER)
    wl = sum(picked[e] for e in LOWER)
    want_wu = min(2 * max(correct[e] for e in UPPER), sum(wrong.get(e, 0) for e in UPPER))
    want_wl = min(2 * max(correct[e] for e in LOWER), sum(wrong.get(e, 0) for e in LOWER))
    assert (wu, wl) == (want_wu, want_wl)
    assert len(set(sel.indices.tolist())) == len(sel.indices)
    assert all(picked[e] <= wrong[e] for e in wrong)
    return sel


@given(pool_scenario())
def test_doubling_rule_exact(scenario):
    check_pools(*scenario)


def test_doubling_rule_twenty_scenarios():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        correct = {e.value: int(rng.integers(1, 80)) for e in EXERCISE_ORDER}
        wrong = {e.value: int(rng.integers(0, 200)) for e in EVALUATED_EXERCISES}
        check_pools(correct, wrong, int(rng.integers(1 << 30)))


def test_pool_sampling_proportional_and_seeded():
    wrong = ["KFL"] * 100 + ["SQT"] * 300 + ["EAH"] * 50
    sel = sample_recw_wrong_pools(wrong, (20, 40), seed=7)
    assert sel.per_exercise["KFL"] == 10 and sel.per_exercise["SQT"] == 30
    assert sel.per_exercise["EAH"] == 20
    again = sample_recw_wrong_pools(wrong, (20, 40), seed=7)
    np.testing.assert_array_equal(sel.indices, again.indices)
    other = sample_recw_wrong_pools(wrong, (20, 40), seed=8)
    assert not np.array_equal(sel.indices, other.indices)


def test_undersized_pool_flagged():
    sel = sample_recw_wrong_pools(["EAH"] * 5, (10, 0), seed=0)
    assert sel.undersized["WU"] and len(sel.indices) == 5
