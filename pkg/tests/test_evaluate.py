import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import at_gc_dataset, two_alphabet_dataset
from ncdembed.errors import ClassTooSmall, LengthMismatch
from ncdembed.evaluate import (
    METRICS,
    EvalReport,
    ExperimentConfig,
    RunResult,
    allocate,
    compute_metrics,
    evaluate_distance,
    make_splits,
    run_experiment,
)
from ncdembed.ncd import distance_matrix
from ncdembed.seqio import build_dataset
from oracles import brute_metrics


# ---------------------------------------------------------------- splits


def _check_plan(plan, labels):
    n = len(labels)
    labels = np.asarray(labels)
    for sp in plan.splits:
        parts = [sp.train, sp.val, sp.test]
        allidx = np.concatenate(parts)
        assert sorted(allidx.tolist()) == list(range(n))
        assert len(sp.train) == math.floor(0.6 * n + 0.5)
        assert len(sp.val) == math.floor(Fraction(n, 10) + Fraction(1, 2))
        for c in np.unique(labels):
            size = int((labels == c).sum())
            for part, frac in zip(parts, (0.6, 0.1, 0.3)):
                assert abs(int((labels[part] == c).sum()) - frac * size) <= 1 + 1e-9


def test_split_sizes_balanced_hundred():
    labels = ["a", "b"] * 50
    plan = make_splits(labels)
    _check_plan(plan, labels)
    for sp in plan.splits:
        assert (len(sp.train), len(sp.val), len(sp.test)) == (60, 10, 30)
        lab = np.array(labels)
        for c in "ab":
            assert [(lab[p] == c).sum() for p in (sp.train, sp.val, sp.test)] == [30, 5, 15]


def test_split_single_class_of_ten():
    sp = make_splits(["x"] * 10, runs=1).splits[0]
    assert (len(sp.train), len(sp.val), len(sp.test)) == (6, 1, 3)


def test_split_seeds_and_determinism():
    labels = ["a"] * 7 + ["b"] * 13 + ["c"] * 9
    a, b = make_splits(labels, base_seed=41), make_splits(labels, base_seed=41)
    assert a.run_seeds == [41, 42, 43, 44, 45]
    for x, y in zip(a.splits, b.splits):
        for part in ("train", "val", "test"):
            assert np.array_equal(getattr(x, part), getattr(y, part))
    c = make_splits(labels, base_seed=0)
    assert any(not np.array_equal(x.train, y.train) for x, y in zip(a.splits, c.splits))


def test_runs_differ_from_each_other():
    plan = make_splits(["a", "b"] * 20)
    trains = {tuple(sp.train) for sp in plan.splits}
    assert len(trains) == 5


def test_class_too_small():
    with pytest.raises(ClassTooSmall) as err:
        make_splits(["a"] * 10 + ["b"] * 3)
    assert "b" in str(err.value)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(4, 40), min_size=1, max_size=7), st.integers(0, 1000))
def test_stratification_property(counts, seed):
    labels = [f"c{i}" for i, c in enumerate(counts) for _ in range(c)]
    _check_plan(make_splits(labels, runs=2, base_seed=seed), labels)


def test_allocate_totals_on_awkward_sizes():
    for counts in itertools.product(range(4, 12), repeat=3):
        alloc = allocate(list(counts))
        n = sum(counts)
        assert sum(t for t, _, _ in alloc) == math.floor(Fraction(6 * n, 10) + Fraction(1, 2))
        assert sum(v for _, v, _ in alloc) == math.floor(Fraction(n, 10) + Fraction(1, 2))


# ---------------------------------------------------------------- metrics


def _onehot(pred, C):
    return np.eye(C)[pred]


def test_accuracy_two_thirds():
    m = compute_metrics([1, 1, 0], _onehot([1, 0, 0], 2))
    assert m["accuracy"] == 2 / 3


def test_perfect_auc():
    scores = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]])
    assert compute_metrics([0, 0, 1, 1], scores)["roc_auc"] == 1.0


def test_three_class_hand_case():
    y_true = [0, 0, 1, 1, 2, 2]
    y_pred = [0, 1, 1, 1, 2, 0]
    # per-class P = (1/2, 2/3, 1), R = (1/2, 1, 1/2), F1 = (1/2, 4/5, 2/3)
    m = compute_metrics(y_true, _onehot(y_pred, 3))
    assert m["f1_macro"] == float((Fraction(1, 2) + Fraction(4, 5) + Fraction(2, 3)) / 3)
    assert m["f1_weighted"] == m["f1_macro"]  # balanced supports
    want = brute_metrics(y_true, y_pred, _onehot(y_pred, 3).tolist(), 3)
    for key in METRICS:
        assert m[key] == float(want[key])


def _exhaustive_cases():
    grid = [0.1, 0.3, 0.6]
    rng = np.random.default_rng(0)
    for C in (2, 3):
        for m in range(1, 9):
            for _ in range(25):
                y_true = rng.integers(0, C, size=m)
                raw = rng.choice(grid, size=(m, C))
                yield C, y_true, raw / raw.sum(axis=1, keepdims=True)


def test_metrics_match_oracle_small_inputs():
    checked = 0
    for C, y_true, proba in _exhaustive_cases():
        got = compute_metrics(y_true, proba, C)
        y_pred = [int(np.argmax(r)) for r in proba]
        want = brute_metrics(y_true.tolist(), y_pred, proba.tolist(), C)
        for key in METRICS:
            if want[key] is None:
                assert math.isnan(got[key])
            else:
                assert got[key] == float(want[key]), (key, y_true, proba)
        checked += 1
    assert checked == 2 * 8 * 25


def test_auc_skips_classes_absent_from_truth():
    proba = np.array([[0.7, 0.2, 0.1], [0.2, 0.7, 0.1], [0.6, 0.3, 0.1]])
    m = compute_metrics([0, 1, 0], proba)
    assert m["roc_auc"] == 1.0


def test_auc_undefined_when_single_class_in_truth():
    assert math.isnan(compute_metrics([0, 0], [[0.9, 0.1], [0.4, 0.6]])["roc_auc"])


def test_metrics_length_mismatch():
    with pytest.raises(LengthMismatch):
        compute_metrics([0, 1], [[1, 0]])


def test_metrics_in_unit_interval():
    for C, y_true, proba in itertools.islice(_exhaustive_cases(), 200):
        for v in compute_metrics(y_true, proba, C).values():
            assert math.isnan(v) or 0 <= v <= 1


# ---------------------------------------------------------------- reports


def test_aggregate_mean_between_min_and_max():
    runs = [RunResult(i, {k: v for k in METRICS}, 0.1) for i, v in enumerate([0.1, 0.2, 0.7])]
    runs.append(RunResult(9, {k: 0.1 for k in METRICS}, 0.3))
    agg = EvalReport({}, ["a"], runs).aggregate()
    for name in METRICS:
        assert 0.1 <= agg[name]["mean"] <= 0.7
        assert agg[name]["sd"] >= 0


def test_aggregate_constant_runs_exact():
    runs = [RunResult(i, {k: 0.1 for k in METRICS}, 0.0) for i in range(5)]
    agg = EvalReport({}, ["a"], runs).aggregate()
    assert agg["accuracy"] == {"mean": 0.1, "sd": 0.0}


def test_sample_standard_deviation():
    runs = [RunResult(i, {k: float(v) for k in METRICS}, 0.0) for i, v in enumerate([1, 2, 3, 4])]
    assert EvalReport({}, ["a"], runs).sd("accuracy") == pytest.approx(math.sqrt(5 / 3), rel=1e-15)


def test_report_json_excludes_timing_by_default():
    runs = [RunResult(0, {k: 1.0 for k in METRICS}, 0.25)]
    rep = EvalReport({"classifier": "knn"}, ["a"], runs)
    assert "train_time" not in rep.to_json()
    assert "train_time" in rep.to_json(include_timing=True)
    assert rep.to_dict()["schema"] == "ncdembed.eval/1"
    assert "accuracy" in rep.table()


# ---------------------------------------------------------------- experiments


@pytest.fixture(scope="module")
def separable():
    d = two_alphabet_dataset(n=40, length=200, seed=2)
    return d, distance_matrix(d)


@pytest.mark.parametrize("clf", ["knn", "lr", "nb", "ncd-knn"])
def test_separable_dataset_reaches_perfect_accuracy(separable, clf):
    d, dm = separable
    rep = run_experiment(d, ExperimentConfig(classifier=clf, components=8), dist=dm)
    assert rep.mean("accuracy") == 1.0
    assert rep.mean("roc_auc") == 1.0
    for name in METRICS:
        assert rep.sd(name) < 0.002


@pytest.mark.parametrize("mode", ["row_feature", "distance_substitution"])
def test_inductive_mode(separable, mode):
    d, dm = separable
    cfg = ExperimentConfig(kernel_mode=mode, inductive=True, components=6)
    rep = run_experiment(d, cfg, dist=dm)
    assert rep.mean("accuracy") == 1.0
    assert all(r.sigma2 > 0 and r.components <= 6 for r in rep.runs)


def test_tune_k_records_choice(separable):
    d, dm = separable
    rep = run_experiment(d, ExperimentConfig(tune_k=True, components=4), dist=dm)
    assert all(r.k in (1, 3, 5, 7, 9, 11, 15, 21) for r in rep.runs)
    rep = run_experiment(d, ExperimentConfig(classifier="ncd-knn", tune_k=True), dist=dm)
    assert all(r.k is not None for r in rep.runs)


def test_rerun_is_bit_identical(separable):
    d, dm = separable
    cfg = ExperimentConfig(classifier="lr", components=5, epochs=50)
    a = run_experiment(d, cfg, dist=dm).to_json()
    b = run_experiment(d, cfg, dist=dm).to_json()
    assert a == b


def test_shuffled_labels_are_near_chance():
    d = at_gc_dataset(n_per_class=20, length=300)
    dm = distance_matrix(d)
    rng = np.random.default_rng(5)
    accs = []
    for trial in range(6):
        labels = list(rng.permutation(d.labels))
        rep = evaluate_distance(dm, labels, ExperimentConfig(components=8, base_seed=trial))
        accs.extend(r.metrics["accuracy"] for r in rep.runs)
    mean, sd = float(np.mean(accs)), float(np.std(accs, ddof=1))
    assert abs(mean - 0.5) <= 3 * sd


def test_real_labels_are_learned():
    d = at_gc_dataset(n_per_class=20, length=300)
    rep = run_experiment(d, ExperimentConfig(components=8))
    assert rep.mean("accuracy") > 0.9


def test_config_rejects_unknown_classifier():
    with pytest.raises(ValueError):
        ExperimentConfig(classifier="svm")


def test_evaluate_distance_label_count():
    d = build_dataset([(f"s{i}", "a", b"ACGT" * (i + 1)) for i in range(5)])
    with pytest.raises(LengthMismatch):
        evaluate_distance(distance_matrix(d), ["a"] * 4, ExperimentConfig())
