"""Metric tests: frozen anchors, a golden report fixture, exhaustive
small-frame agreement with counting oracles, and structural properties."""

import json
import pathlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircontrast.data import PatientRecord, SensitiveAttributes
from faircontrast.errors import ConfigError, ContractError, MetricError
from faircontrast.metrics import (
    EvalFrame,
    auroc,
    eddi,
    equalized_odds,
    f1,
    fairness_report,
    format_report_table,
    frame_from_records,
    subgroup_stats,
)
from oracles import (
    auroc_direct,
    eddi_direct,
    enumerate_frames,
    equalized_odds_direct,
    f1_direct,
)

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# score stand-ins for a desired prediction at threshold 0.5
HI, LO = 0.8, 0.2


def make_frame(labels, preds, groups=None, attr="group"):
    scores = [HI if p else LO for p in preds]
    subgroups = {attr: np.asarray(groups)} if groups is not None else {}
    return EvalFrame(labels=np.asarray(labels), scores=np.asarray(scores), subgroups=subgroups)


# ---------------------------------------------------------------------------
# frame contract
# ---------------------------------------------------------------------------


def test_frame_rejects_length_mismatch():
    with pytest.raises(ContractError):
        EvalFrame(labels=[0, 1], scores=[0.5], subgroups={})


def test_frame_rejects_empty():
    with pytest.raises(ContractError):
        EvalFrame(labels=[], scores=[], subgroups={})


def test_frame_rejects_nonbinary_labels():
    with pytest.raises(ContractError):
        EvalFrame(labels=[0, 2], scores=[0.5, 0.5], subgroups={})


def test_frame_rejects_out_of_range_scores():
    with pytest.raises(ContractError):
        EvalFrame(labels=[0, 1], scores=[0.5, 1.5], subgroups={})


def test_frame_rejects_bad_threshold():
    with pytest.raises(ConfigError):
        EvalFrame(labels=[0, 1], scores=[0.5, 0.5], subgroups={}, threshold=1.5)


def test_frame_rejects_short_subgroup_labelling():
    with pytest.raises(ContractError):
        EvalFrame(labels=[0, 1], scores=[0.5, 0.5], subgroups={"g": np.array(["a"])})


def test_threshold_is_inclusive():
    frame = EvalFrame(labels=[0, 1], scores=[0.5, 0.49], subgroups={}, threshold=0.5)
    assert frame.predictions.tolist() == [1, 0]


def test_frame_from_records_builds_all_five_labellings():
    attrs = [
        SensitiveAttributes("female", "black", "hispanic", 67, "medicaid"),
        SensitiveAttributes("male", "white", "nonhispanic", 95, "private"),
    ]
    records = [
        PatientRecord(
            id=f"p{i}",
            attrs=a,
            longitudinal=np.zeros((2, 1)),
            note_embedding=np.zeros(3),
            label=i,
            missing_mask=np.zeros((2, 1), dtype=bool),
        )
        for i, a in enumerate(attrs)
    ]
    frame = frame_from_records(records, scores=[0.3, 0.7])
    assert set(frame.subgroups) == {"gender", "race", "ethnicity", "age", "ses"}
    assert frame.subgroups["age"].tolist() == ["60-69", "90+"]
    assert frame.subgroups["race"].tolist() == ["black", "white"]
    assert frame.labels.tolist() == [0, 1]


# ---------------------------------------------------------------------------
# anchors
# ---------------------------------------------------------------------------


def test_f1_anchor_two_thirds():
    # TP=2 FP=1 FN=1 -> 2*2 / (2*2 + 1 + 1)
    frame = make_frame(labels=[1, 1, 1, 0], preds=[1, 1, 0, 1])
    assert f1(frame) == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_f1_degenerate_is_zero():
    frame = make_frame(labels=[0, 0], preds=[0, 0])
    assert f1(frame) == 0.0


def test_auroc_anchor_three_quarters():
    frame = EvalFrame(labels=[1, 1, 0, 0], scores=[0.9, 0.4, 0.6, 0.2], subgroups={})
    assert auroc(frame) == pytest.approx(0.75, abs=1e-15)


def test_auroc_perfect_separation():
    frame = EvalFrame(labels=[0, 0, 1, 1], scores=[0.1, 0.2, 0.8, 0.9], subgroups={})
    assert auroc(frame) == 1.0


def test_auroc_constant_scores_is_half():
    frame = EvalFrame(labels=[0, 1, 0, 1], scores=[0.4] * 4, subgroups={})
    assert auroc(frame) == pytest.approx(0.5, abs=1e-15)


def test_auroc_needs_both_classes():
    frame = EvalFrame(labels=[1, 1], scores=[0.2, 0.9], subgroups={})
    with pytest.raises(MetricError):
        auroc(frame)


def test_equalized_odds_anchor():
    # A: TPR 1.0, FPR 0.5   B: TPR 0.8, FPR 0.4  ->  gaps 0.2 / 0.1, mean 0.15
    labels = [1, 1, 0, 0] + [1] * 5 + [0] * 5
    preds = [1, 1, 1, 0] + [1, 1, 1, 1, 0] + [1, 1, 0, 0, 0]
    groups = ["a"] * 4 + ["b"] * 10
    res = equalized_odds(make_frame(labels, preds, groups), "group")
    assert res.eo_tpr == pytest.approx(0.2, abs=1e-12)
    assert res.eo_fpr == pytest.approx(0.1, abs=1e-12)
    assert res.eo == pytest.approx(0.15, abs=1e-12)
    assert res.excluded_tpr == [] and res.excluded_fpr == []


def test_equalized_odds_three_group_anchor():
    # TPRs 1, 0.5, 0 with equal FPRs: TPR side (0.5+1+0.5)/3, FPR side 0
    labels = [1, 1, 0, 0] * 3
    preds = [1, 1, 1, 0] + [1, 0, 1, 0] + [0, 0, 1, 0]
    groups = ["a"] * 4 + ["b"] * 4 + ["c"] * 4
    res = equalized_odds(make_frame(labels, preds, groups), "group")
    assert res.eo_tpr == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert res.eo_fpr == pytest.approx(0.0, abs=1e-12)
    assert res.eo == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_equalized_odds_needs_two_subgroups():
    frame = make_frame([1, 0], [1, 0], ["a", "a"])
    with pytest.raises(MetricError):
        equalized_odds(frame, "group")


def test_equalized_odds_unknown_attribute():
    frame = make_frame([1, 0], [1, 0], ["a", "b"])
    with pytest.raises(ContractError):
        subgroup_stats(frame, "nope")


def test_equalized_odds_partial_exclusion_two_groups():
    # b has no negatives: FPR side loses its only pair, eo falls back to TPR
    labels = [1, 0, 1, 1]
    preds = [1, 1, 1, 0]
    groups = ["a", "a", "b", "b"]
    res = equalized_odds(make_frame(labels, preds, groups), "group")
    assert res.eo_fpr is None
    assert res.excluded_fpr == ["b"]
    assert res.eo_tpr == pytest.approx(0.5, abs=1e-12)
    assert res.eo == pytest.approx(res.eo_tpr, abs=1e-15)


def test_equalized_odds_partial_exclusion_three_groups():
    # c has no negatives; the a-b FPR pair survives
    labels = [1, 0, 1, 0, 1, 1]
    preds = [1, 1, 1, 0, 1, 1]
    groups = ["a", "a", "b", "b", "c", "c"]
    res = equalized_odds(make_frame(labels, preds, groups), "group")
    assert res.excluded_fpr == ["c"]
    assert res.eo_fpr == pytest.approx(1.0, abs=1e-12)  # FPR a=1, b=0
    assert res.eo_tpr == pytest.approx(0.0, abs=1e-12)  # all TPRs are 1
    assert res.eo == pytest.approx(0.5, abs=1e-12)


def test_equalized_odds_all_pairs_undefined():
    # a holds every positive, b every negative: neither side has a valid pair
    labels = [1, 1, 0, 0]
    preds = [1, 0, 1, 0]
    groups = ["a", "a", "b", "b"]
    with pytest.raises(MetricError) as err:
        equalized_odds(make_frame(labels, preds, groups), "group")
    assert "group" in str(err.value)


def test_eddi_anchor():
    # a: 4 records 1 error, b: 6 records 3 errors; OER 0.4, scale 0.6
    labels = [1, 1, 1, 1] + [1, 1, 1, 0, 0, 0]
    preds = [1, 1, 1, 0] + [1, 0, 0, 1, 0, 0]
    groups = ["a"] * 4 + ["b"] * 6
    frame = make_frame(labels, preds, groups)
    assert eddi(frame, "group", "signed") == pytest.approx(-0.0416667, abs=1e-6)
    assert eddi(frame, "group", "absolute") == pytest.approx(0.2083333, abs=1e-6)


def test_eddi_single_subgroup_is_zero():
    frame = make_frame([1, 0, 1], [1, 1, 0], ["a", "a", "a"])
    assert eddi(frame, "group", "absolute") == 0.0
    assert eddi(frame, "group", "signed") == 0.0


def test_eddi_perfect_classifier_is_zero():
    frame = make_frame([1, 0, 1, 0], [1, 0, 1, 0], ["a", "a", "b", "b"])
    assert eddi(frame, "group", "absolute") == 0.0
    res = equalized_odds(frame, "group")
    assert res.eo == 0.0


def test_eddi_rejects_unknown_variant():
    frame = make_frame([1, 0], [1, 0], ["a", "b"])
    with pytest.raises(ConfigError):
        eddi(frame, "group", "median")


def test_eddi_default_variant_is_absolute():
    labels = [1, 1, 1, 1] + [1, 1, 1, 0, 0, 0]
    preds = [1, 1, 1, 0] + [1, 0, 0, 1, 0, 0]
    groups = ["a"] * 4 + ["b"] * 6
    frame = make_frame(labels, preds, groups)
    assert eddi(frame, "group") == eddi(frame, "group", "absolute")


def test_eddi_merged_equal_error_subgroups():
    # a and b share an error rate, so merging them leaves their (shared)
    # contribution intact and only reweights the average
    labels = [1, 1, 1, 1, 0, 0, 0, 0, 1, 0]
    preds = [1, 0, 1, 0, 0, 1, 1, 0, 0, 1]
    groups3 = ["a", "a", "a", "a", "b", "b", "b", "b", "c", "c"]
    groups2 = ["ab"] * 8 + ["c", "c"]
    frame3 = make_frame(labels, preds, groups3)
    frame2 = make_frame(labels, preds, groups2)
    stats3 = {s.name: s.error_rate for s in subgroup_stats(frame3, "group")}
    assert stats3["a"] == stats3["b"]
    oer = 6 / 10
    scale = max(oer, 1 - oer)
    g_ab = abs(stats3["a"] - oer) / scale
    g_c = abs(stats3["c"] - oer) / scale
    assert eddi(frame3, "group", "absolute") == pytest.approx((2 * g_ab + g_c) / 3, abs=1e-12)
    assert eddi(frame2, "group", "absolute") == pytest.approx((g_ab + g_c) / 2, abs=1e-12)


def test_subgroup_counts_partition_frame():
    rng = np.random.default_rng(7)
    n = 40
    frame = EvalFrame(
        labels=rng.integers(0, 2, n),
        scores=rng.random(n),
        subgroups={"g": rng.choice(["a", "b", "c"], n)},
    )
    stats = subgroup_stats(frame, "g")
    assert sum(s.count for s in stats) == n
    for s in stats:
        assert s.tp + s.fp + s.tn + s.fn == s.count


# ---------------------------------------------------------------------------
# golden report fixture
# ---------------------------------------------------------------------------


def test_report_matches_golden_file():
    doc = json.loads((FIXTURES / "golden_report.json").read_text())
    frame = EvalFrame(
        labels=doc["labels"],
        scores=doc["scores"],
        subgroups={k: np.asarray(v) for k, v in doc["subgroups"].items()},
        threshold=doc["threshold"],
    )
    report = fairness_report(frame)
    exp = doc["expected"]
    tol = 1e-12
    assert report.f1 == pytest.approx(exp["f1"], abs=tol)
    assert report.auroc == pytest.approx(exp["auroc"], abs=tol)
    assert report.eo_mean == pytest.approx(exp["eo_mean"], abs=tol)
    assert report.eddi_abs_mean == pytest.approx(exp["eddi_abs_mean"], abs=tol)
    assert report.eddi_signed_mean == pytest.approx(exp["eddi_signed_mean"], abs=tol)
    by_attr = {a.attribute: a for a in report.attributes}
    assert set(by_attr) == set(exp["attributes"])
    for attr, want in exp["attributes"].items():
        row = by_attr[attr]
        assert row.error is None
        assert row.eo == pytest.approx(want["eo"], abs=tol)
        assert row.eo_tpr == pytest.approx(want["eo_tpr"], abs=tol)
        assert row.eo_fpr == pytest.approx(want["eo_fpr"], abs=tol)
        assert row.eddi_abs == pytest.approx(want["eddi_abs"], abs=tol)
        assert row.eddi_signed == pytest.approx(want["eddi_signed"], abs=tol)


def test_report_serialization_round_trips():
    doc = json.loads((FIXTURES / "golden_report.json").read_text())
    frame = EvalFrame(
        labels=doc["labels"],
        scores=doc["scores"],
        subgroups={k: np.asarray(v) for k, v in doc["subgroups"].items()},
        threshold=doc["threshold"],
    )
    report = fairness_report(frame)
    loaded = json.loads(report.to_json())
    assert loaded["n"] == 50
    assert loaded["f1"] == report.f1
    assert {a["attribute"] for a in loaded["attributes"]} == set(doc["subgroups"])


# ---------------------------------------------------------------------------
# exhaustive small-frame agreement with the counting oracles
# ---------------------------------------------------------------------------


def test_exhaustive_frames_agree_with_oracles():
    # every multiset of (label, prediction, subgroup) cells, two subgroups,
    # up to 8 records
    cells = [(y, p, g) for y in (0, 1) for p in (0, 1) for g in ("a", "b")]
    checked = 0
    for rows in enumerate_frames(8, cells):
        labels = [r[0] for r in rows]
        preds = [r[1] for r in rows]
        groups = [r[2] for r in rows]
        frame = make_frame(labels, preds, groups)
        assert f1(frame) == pytest.approx(f1_direct(labels, preds), abs=1e-12)
        for variant in ("absolute", "signed"):
            assert eddi(frame, "group", variant) == pytest.approx(
                eddi_direct(labels, preds, groups, variant), abs=1e-12
            )
        if len(set(groups)) >= 2:
            want_tpr, want_fpr, want_eo = equalized_odds_direct(labels, preds, groups)
            if want_eo is None:
                with pytest.raises(MetricError):
                    equalized_odds(frame, "group")
            else:
                res = equalized_odds(frame, "group")
                assert res.eo == pytest.approx(want_eo, abs=1e-12)
                for got, want in ((res.eo_tpr, want_tpr), (res.eo_fpr, want_fpr)):
                    if want is None:
                        assert got is None
                    else:
                        assert got == pytest.approx(want, abs=1e-12)
        checked += 1
    assert checked == 12869  # sum of C(7+n, n) for n = 1..8


def test_exhaustive_auroc_agrees_with_pair_counting():
    # every multiset of (label, score) cells over three score levels,
    # up to 6 records; single-class frames are the oracle's precondition
    cells = [(y, s) for y in (0, 1) for s in (0.2, 0.5, 0.8)]
    checked = 0
    for rows in enumerate_frames(6, cells):
        labels = [r[0] for r in rows]
        scores = [r[1] for r in rows]
        if len(set(labels)) < 2:
            continue
        frame = EvalFrame(labels=labels, scores=scores, subgroups={})
        assert auroc(frame) == pytest.approx(auroc_direct(labels, scores), abs=1e-12)
        checked += 1
    assert checked > 500


# ---------------------------------------------------------------------------
# report behaviour under partial failure
# ---------------------------------------------------------------------------


def _two_attribute_frame():
    labels = [1, 0, 1, 0, 1, 0]
    preds = [1, 1, 1, 0, 0, 0]
    scores = [HI if p else LO for p in preds]
    return EvalFrame(
        labels=labels,
        scores=scores,
        subgroups={
            "solo": np.array(["x"] * 6),  # one subgroup: EO undefined
            "pair": np.array(["a", "a", "a", "b", "b", "b"]),
        },
    )


def test_report_annotates_failed_attribute_and_keeps_eddi():
    report = fairness_report(_two_attribute_frame(), attributes=("solo", "pair"))
    rows = {a.attribute: a for a in report.attributes}
    assert rows["solo"].error is not None
    assert rows["solo"].eo is None
    assert rows["solo"].eddi_abs == 0.0  # single subgroup matches the cohort
    assert rows["pair"].error is None
    assert report.eo_mean == pytest.approx(rows["pair"].eo, abs=1e-15)


def test_report_table_formatting():
    report = fairness_report(_two_attribute_frame(), attributes=("solo", "pair"))
    table = format_report_table(report)
    assert "↑" in table and "↓" in table
    assert "undefined:" in table
    # percentages print to one decimal
    assert f"{100.0 * report.f1:5.1f}" in table
    report2 = fairness_report(
        EvalFrame(
            labels=[1, 0, 1, 1],
            scores=[HI, HI, HI, LO],
            subgroups={"pair": np.array(["a", "a", "b", "b"])},
        ),
        attributes=("pair",),
    )
    assert "excluded from FPR pairs: b" in format_report_table(report2)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------


@st.composite
def labelled_frames(draw, min_groups=1):
    n = draw(st.integers(2, 24))
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    preds = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    groups = draw(st.lists(st.sampled_from("abc"), min_size=n, max_size=n))
    if len(set(groups)) < min_groups:
        groups = (["a", "b", "c"] * n)[:n]
    return labels, preds, groups


@settings(max_examples=120, deadline=None)
@given(labelled_frames(), st.randoms(use_true_random=False))
def test_metrics_are_permutation_invariant(frame_data, rnd):
    labels, preds, groups = frame_data
    perm = list(range(len(labels)))
    rnd.shuffle(perm)
    base = make_frame(labels, preds, groups)
    shuf = make_frame(
        [labels[i] for i in perm], [preds[i] for i in perm], [groups[i] for i in perm]
    )
    assert f1(base) == pytest.approx(f1(shuf), abs=1e-12)
    for variant in ("absolute", "signed"):
        assert eddi(base, "group", variant) == pytest.approx(
            eddi(shuf, "group", variant), abs=1e-12
        )
    if len(set(labels)) == 2:
        scores = [HI if p else LO for p in preds]
        a = EvalFrame(labels=labels, scores=scores, subgroups={})
        b = EvalFrame(
            labels=[labels[i] for i in perm],
            scores=[scores[i] for i in perm],
            subgroups={},
        )
        assert auroc(a) == pytest.approx(auroc(b), abs=1e-12)
    try:
        eo_base = equalized_odds(base, "group")
    except MetricError:
        with pytest.raises(MetricError):
            equalized_odds(shuf, "group")
        return
    eo_shuf = equalized_odds(shuf, "group")
    assert eo_base.eo == pytest.approx(eo_shuf.eo, abs=1e-12)


@settings(max_examples=120, deadline=None)
@given(labelled_frames(min_groups=2))
def test_metric_ranges(frame_data):
    labels, preds, groups = frame_data
    frame = make_frame(labels, preds, groups)
    assert 0.0 <= f1(frame) <= 1.0
    assert 0.0 <= eddi(frame, "group", "absolute") <= 1.0
    assert -1.0 <= eddi(frame, "group", "signed") <= 1.0
    try:
        res = equalized_odds(frame, "group")
    except MetricError:
        return
    assert 0.0 <= res.eo <= 1.0


@settings(max_examples=80, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 1), st.floats(0.05, 0.95, allow_nan=False)),
        min_size=4,
        max_size=24,
    )
)
def test_auroc_invariant_under_monotone_transforms(pairs):
    labels = [y for y, _ in pairs]
    scores = [round(s, 3) for _, s in pairs]
    if len(set(labels)) < 2:
        labels[0], labels[1] = 0, 1
    base = auroc(EvalFrame(labels=labels, scores=scores, subgroups={}))
    for transform in (lambda x: x * x, np.sqrt, lambda x: 0.1 + 0.8 * x):
        mapped = [float(transform(s)) for s in scores]
        got = auroc(EvalFrame(labels=labels, scores=mapped, subgroups={}))
        assert got == pytest.approx(base, abs=1e-12)
