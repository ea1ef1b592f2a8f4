import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geojam import evaluation as ev
from geojam import stationary as sd
from geojam.evaluation import ConfusionMatrix
from geojam.scenario import SchemaError, feature_matrix, label_vector

counts = st.integers(0, 10_000)


class TestConfusion:
    def test_all_correct(self):
        cm = ev.confusion([0, 1, 1, 0], [0, 1, 1, 0])
        assert cm.fp == cm.fn == 0 and cm.tp == 2 and cm.tn == 2

    def test_counts(self):
        cm = ev.confusion([1, 1, 0, 0, 1], [1, 0, 1, 0, 1])
        assert cm == ConfusionMatrix(tp=2, fp=1, fn=1, tn=1)
        assert cm.total == 5

    def test_contract(self):
        with pytest.raises(ValueError):
            ev.confusion([0, 1], [0])
        with pytest.raises(ValueError):
            ev.confusion([], [])
        with pytest.raises(ValueError):
            ev.confusion([0, 2], [0, 1])
        with pytest.raises(ValueError):
            ConfusionMatrix(-1, 0, 0, 0)

    def test_reference_adaptive_counts(self):
        cm = ConfusionMatrix(tp=24961, fp=717, fn=1433, tn=25173)
        m = ev.class_metrics(cm)
        assert abs(100 * cm.accuracy - 95.89) <= 0.02
        assert abs(100 * m["jammed"].precision - 97.20) <= 0.02
        assert m["jammed"].precision == pytest.approx(24961 / 25678)

    def test_reference_pca_counts(self):
        cm = ConfusionMatrix(tp=411, fp=28, fn=42, tn=519)
        assert cm.accuracy == 0.93

    def test_reference_no_pca_counts(self):
        # 547 non-jammed and 453 jammed test rows with 110 false positives, 184 false negatives
        cm = ConfusionMatrix(tp=453 - 184, fp=110, fn=184, tn=547 - 110)
        assert cm.accuracy == pytest.approx(0.706, abs=1e-12)


class TestClassMetrics:
    def test_perfect(self):
        m = ev.class_metrics(ConfusionMatrix(5, 0, 0, 7))
        for c in ev.CLASSES:
            assert (m[c].precision, m[c].recall, m[c].f1, m[c].accuracy) == (1.0, 1.0, 1.0, 1.0)

    def test_undefined_is_none(self):
        m = ev.class_metrics(ConfusionMatrix(0, 0, 0, 9))
        assert m["jammed"].precision is None and m["jammed"].recall is None and m["jammed"].f1 is None
        assert m["non_jammed"].precision == 1.0
        assert ev.pct(m["jammed"].f1) == "undefined"

    def test_zero_f1_when_defined(self):
        m = ev.class_metrics(ConfusionMatrix(0, 3, 4, 1))
        assert m["jammed"].precision == 0.0 and m["jammed"].recall == 0.0 and m["jammed"].f1 == 0.0

    @settings(max_examples=500)
    @given(counts, counts, counts, counts)
    def test_identities(self, tp, fp, fn, tn):
        if tp + fp + fn + tn == 0:
            return
        cm = ConfusionMatrix(tp, fp, fn, tn)
        assert cm.accuracy == (tp + tn) / (tp + fp + fn + tn)
        for c, m in ev.class_metrics(cm).items():
            if m.f1 is not None:
                assert 0.0 <= m.f1 <= 1.0
                assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12

    @settings(max_examples=300)
    @given(counts, counts, counts, counts)
    def test_swap_exchanges_blocks(self, tp, fp, fn, tn):
        if tp + fp + fn + tn == 0:
            return
        cm = ConfusionMatrix(tp, fp, fn, tn)
        a, b = ev.class_metrics(cm), ev.class_metrics(cm.swapped())
        assert a["jammed"] == b["non_jammed"] and a["non_jammed"] == b["jammed"]


class TestRoc:
    def test_perfect_ranking(self):
        y = np.array([0, 1, 0, 1, 1])
        assert ev.roc(y, y.astype(float)).auc == 1.0

    def test_constant_scores(self):
        c = ev.roc([0, 1, 1, 0, 1], [0.3] * 5)
        assert c.auc == 0.5
        assert c.fpr.tolist() == [0.0, 1.0] and c.tpr.tolist() == [0.0, 1.0]

    def test_random_scores(self):
        rng = np.random.default_rng(7)
        y = rng.integers(0, 2, 10_000)
        assert ev.roc(y, rng.random(10_000)).auc == pytest.approx(0.5, abs=0.02)

    def test_needs_both_classes(self):
        with pytest.raises(ValueError):
            ev.roc([1, 1], [0.2, 0.4])

    def test_matches_pairwise_auc(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 2, 300)
        s = np.round(rng.random(300), 1)  # plenty of ties
        pos, neg = s[y == 1], s[y == 0]
        pairwise = (np.sum(pos[:, None] > neg[None, :]) + 0.5 * np.sum(pos[:, None] == neg[None, :])) / (
            pos.size * neg.size
        )
        assert ev.roc(y, s).auc == pytest.approx(pairwise, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.floats(0.0, 1.0)), min_size=2, max_size=200))
    def test_curve_properties(self, pairs):
        y = np.array([p[0] for p in pairs])
        s = np.array([p[1] for p in pairs])
        if y.min() == y.max():
            return
        c = ev.roc(y, s)
        assert (c.fpr[0], c.tpr[0]) == (0.0, 0.0) and (c.fpr[-1], c.tpr[-1]) == (1.0, 1.0)
        assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
        assert 0.0 <= c.auc <= 1.0
        assert ev.roc(y, 2.0 * s).auc == c.auc  # exact scaling
        t = np.exp(3.0 * s) - 7.0
        # in floating point the transform stays strictly increasing only while it keeps values apart
        if np.unique(t).size == np.unique(s).size:
            assert ev.roc(y, t).auc == pytest.approx(c.auc, abs=1e-12)


class TestAggregate:
    def test_single(self):
        s = ev.summarize([0.8])
        assert s.mean == 0.8 and s.std == 0.0

    def test_example(self):
        s = ev.summarize([0.5, 0.7, 0.9])
        assert s.mean == pytest.approx(0.7, abs=1e-15)
        assert s.std == pytest.approx(math.sqrt(0.08 / 3), abs=1e-15)

    def test_identical(self):
        assert ev.summarize([0.37] * 11).std == pytest.approx(0.0, abs=1e-15)

    def test_undefined_excluded_and_counted(self):
        out = ev.aggregate_trajectories([{"f1": 0.5}, {"f1": None}, {"f1": 1.0}])
        assert out["f1"].mean == 0.75 and out["f1"].n_used == 2 and out["f1"].n_excluded == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            ev.aggregate_trajectories([])

    def test_brute_force_1000(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            vals = rng.random(int(rng.integers(1, 40))).tolist()
            s = ev.summarize(vals)
            mean = sum(vals) / len(vals)
            std = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals))
            assert abs(s.mean - mean) < 1e-12 and abs(s.std - std) < 1e-12


class TestHarness:
    def test_cross_domain_on_stationary_test_set_reproduces_stationary_run(self, default_stationary):
        records, _ = default_stationary
        res = ev.run_stationary(records, n_trees=20, split_seed=1, forest_seed=2)
        y = label_vector(records)
        split = sd.train_test_split(y, seed=1)
        test_records = [records[i] for i in split.test_indices]
        cross = ev.cross_domain_eval(res.detector, [test_records])
        assert cross.confusion == res.confusion
        assert cross.summary["accuracy"].mean == res.confusion.accuracy

    def test_cross_domain_errors(self, default_stationary):
        records, _ = default_stationary
        X, y = feature_matrix(records[:200]), label_vector(records[:200])
        det = sd.fit_detector(X, y, n_trees=3)
        with pytest.raises(ValueError):
            ev.cross_domain_eval(det, [])
        det.feature_names = ("rss",)
        with pytest.raises(SchemaError):
            ev.cross_domain_eval(det, [records[:10]])

    def test_run_stationary_empty_test_set(self, default_stationary):
        records, _ = default_stationary
        with pytest.raises(ValueError):
            ev.run_stationary(records, train_jammed=2262, train_nonjammed=2738)


class TestRendering:
    def test_stationary_table_layout(self, default_stationary):
        records, _ = default_stationary
        res = ev.run_stationary(records[:1200], n_trees=5, train_jammed=400, train_nonjammed=500)
        text = ev.render(ev.stationary_doc(res))
        assert "Random forest with PCA" in text
        for label in ("Training set size", "Testing set size", "Precision (%)", "Recall (%)", "F1 score (%)", "Accuracy (%)"):
            assert label in text

    def test_pct(self):
        assert ev.pct(0.93) == "93.00"
        assert ev.pct(0.958869) == "95.89"
        assert ev.pct(None) == "undefined"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ev.render({"kind": "nope"})

    def test_csv_outputs(self):
        m = ev.class_metrics(ConfusionMatrix(0, 0, 0, 4))
        lines = ev.metrics_csv("r", m).splitlines()
        assert lines[0] == "run,class,metric,value"
        assert "r,jammed,precision," in lines
        curve = ev.roc([0, 1, 1], [0.1, 0.9, 0.5])
        rows = ev.roc_csv(curve).splitlines()
        assert rows[0] == "threshold,fpr,tpr" and rows[1] == "inf,0,0" and rows[-1].endswith(",1,1")
