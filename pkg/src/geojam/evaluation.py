"""Metrics, experiment harness and table rendering.

The positive class is always "jammed".  A metric whose denominator is zero
is ``None`` and renders as ``undefined``; it is never reported as 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import adaptive, stationary
from .scenario import SchemaError, feature_matrix, label_vector
from .signal import FEATURE_NAMES

CLASSES = ("non_jammed", "jammed")
CLASS_TITLES = {"non_jammed": "Non-jammed", "jammed": "Jammed"}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float | None:
        return (self.tp + self.tn) / self.total if self.total else None

    def swapped(self) -> "ConfusionMatrix":
        """Same predictions with the class roles exchanged."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # score cut for each point; +inf for the origin
    auc: float


@dataclass(frozen=True)
class TrajectorySummary:
    mean: float | None
    std: float | None
    n_used: int
    n_excluded: int


def _binary(y, name):
    a = np.asarray(y).astype(int)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must be binary 0/1")
    return a


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t, p = _binary(y_true, "y_true"), _binary(y_pred, "y_pred")
    if t.size != p.size or t.size == 0:
        raise ValueError("y_true and y_pred must have the same non-zero length")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
        tn=int(np.sum((t == 0) & (p == 0))),
    )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def _positive_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    p = _ratio(cm.tp, cm.tp + cm.fp)
    r = _ratio(cm.tp, cm.tp + cm.fn)
    if p is None or r is None:
        f1 = None
    else:
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return ClassMetrics(p, r, f1, cm.accuracy)


def class_metrics(cm: ConfusionMatrix) -> dict[str, ClassMetrics]:
    """Precision, recall and F1 for both classes (plus the shared accuracy)."""
    return {"jammed": _positive_metrics(cm), "non_jammed": _positive_metrics(cm.swapped())}


def roc(y_true, scores) -> RocCurve:
    """ROC by sweeping the threshold over the distinct scores.

    Equal scores are one step, so a tie block moves diagonally.  AUC uses
    the trapezoidal rule.
    """
    y = _binary(y_true, "y_true")
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape:
        raise ValueError("scores and labels must have the same length")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_block = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tps = np.cumsum(y_sorted)[last_of_block]
    fps = (last_of_block + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thr = np.r_[np.inf, s_sorted[last_of_block]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thr, auc)


def summarize(values) -> TrajectorySummary:
    """Unweighted mean and population std, skipping undefined (None/NaN) entries."""
    used = [float(v) for v in values if v is not None and not math.isnan(v)]
    excluded = len(values) - len(used)
    if not used:
        return TrajectorySummary(None, None, 0, excluded)
    arr = np.array(used)
    return TrajectorySummary(float(arr.mean()), float(arr.std()), len(used), excluded)


def aggregate_trajectories(per_trajectory: list[dict]) -> dict[str, TrajectorySummary]:
    """Summaries of each metric across a list of per-trajectory metric dicts."""
    if not per_trajectory:
        raise ValueError("no trajectories to aggregate")
    keys = list(per_trajectory[0])
    return {k: summarize([m.get(k) for m in per_trajectory]) for k in keys}


def _trajectory_metrics(y_true, y_pred) -> dict:
    cm = confusion(y_true, y_pred)
    return {"accuracy": cm.accuracy, "f1": class_metrics(cm)["jammed"].f1}


# -- experiments ---------------------------------------------------------------


@dataclass
class StationaryResult:
    use_pca: bool
    train_counts: dict[int, int]
    test_counts: dict[int, int]
    confusion: ConfusionMatrix
    train_accuracy: float
    roc: RocCurve
    detector: stationary.StationaryDetector

    @property
    def metrics(self) -> dict[str, ClassMetrics]:
        return class_metrics(self.confusion)


def run_stationary(
    records,
    use_pca: bool = True,
    n_components: int = 1,
    n_trees: int = 100,
    max_depth: int = 10,
    split_seed: int = 0,
    forest_seed: int = 0,
    train_jammed: int = 1809,
    train_nonjammed: int = 2191,
) -> StationaryResult:
    X, y = feature_matrix(records), label_vector(records)
    split = stationary.train_test_split(y, train_jammed, train_nonjammed, split_seed)
    tr, te = split.train_indices, split.test_indices
    if te.size == 0:
        raise ValueError("empty test set: training counts use every record")
    det = stationary.fit_detector(X[tr], y[tr], use_pca, n_components, n_trees, max_depth, forest_seed)
    scores = det.score(X[te])
    pred = (scores > 0.5).astype(int)
    train_acc = float(np.mean(det.predict(X[tr]) == y[tr]))
    return StationaryResult(
        use_pca, split.train_counts, split.test_counts, confusion(y[te], pred), train_acc, roc(y[te], scores), det
    )


def trajectory_series(records) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(SJNR dB, RSS dB, labels) of one trajectory's epoch records."""
    sjnr = np.array([r.features.sjnr_at_target for r in records], dtype=float)
    rss_db = 10.0 * np.log10(np.array([r.features.rss for r in records], dtype=float))
    return sjnr, rss_db, label_vector(records)


@dataclass
class AdaptiveResult:
    config: adaptive.AdaptiveConfig
    traces: list[adaptive.DetectionTrace | None]
    confusion: ConfusionMatrix
    per_trajectory: list[dict]
    summary: dict[str, TrajectorySummary]
    empty_trajectories: int

    @property
    def metrics(self) -> dict[str, ClassMetrics]:
        return class_metrics(self.confusion)


def run_adaptive(trajectories, config: adaptive.AdaptiveConfig) -> AdaptiveResult:
    """Run the threshold detector on every trajectory and pool the points."""
    traces, per_traj, all_true, all_pred = [], [], [], []
    empty = 0
    for records in trajectories:
        if not records:
            traces.append(None)
            empty += 1
            continue
        sjnr, rss_db, y = trajectory_series(records)
        trace = adaptive.detect(sjnr, rss_db, config)
        traces.append(trace)
        per_traj.append(_trajectory_metrics(y, trace.predicted))
        all_true.append(y)
        all_pred.append(trace.predicted)
    if not per_traj:
        raise ValueError("no non-empty trajectories to evaluate")
    cm = confusion(np.concatenate(all_true), np.concatenate(all_pred))
    return AdaptiveResult(config, traces, cm, per_traj, aggregate_trajectories(per_traj), empty)


@dataclass
class CrossDomainResult:
    per_trajectory: list[dict]
    summary: dict[str, TrajectorySummary]
    confusion: ConfusionMatrix
    empty_trajectories: int


def cross_domain_eval(detector: stationary.StationaryDetector, trajectories) -> CrossDomainResult:
    """Score the stationary-trained pipeline on each time-variant trajectory."""
    if not trajectories:
        raise ValueError("no trajectories given")
    if tuple(detector.feature_names) != FEATURE_NAMES:
        raise SchemaError(
            f"model expects features {list(detector.feature_names)}, data provides {list(FEATURE_NAMES)}"
        )
    per_traj, all_true, all_pred = [], [], []
    empty = 0
    for records in trajectories:
        if not records:
            empty += 1
            continue
        y = label_vector(records)
        pred = detector.predict(feature_matrix(records))
        per_traj.append(_trajectory_metrics(y, pred))
        all_true.append(y)
        all_pred.append(pred)
    if not per_traj:
        raise ValueError("every trajectory is empty")
    cm = confusion(np.concatenate(all_true), np.concatenate(all_pred))
    return CrossDomainResult(per_traj, aggregate_trajectories(per_traj), cm, empty)


# -- rendering -----------------------------------------------------------------


def pct(x: float | None, digits: int = 2) -> str:
    return "undefined" if x is None else f"{100.0 * x:.{digits}f}"


def _table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    out = [sep]
    for k, r in enumerate(rows):
        out.append("| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |")
        if k == 0:
            out.append(sep)
    out.append(sep)
    return "\n".join(out)


def _class_rows(metrics: dict[str, ClassMetrics]) -> list[list[str]]:
    return [
        ["Precision (%)"] + [pct(metrics[c].precision) for c in CLASSES],
        ["Recall (%)"] + [pct(metrics[c].recall) for c in CLASSES],
        ["F1 score (%)"] + [pct(metrics[c].f1) for c in CLASSES],
        ["Accuracy (%)", pct(metrics["jammed"].accuracy), ""],
    ]


def render_confusion(cm: ConfusionMatrix) -> str:
    return _table(
        [
            ["", "pred non-jammed", "pred jammed"],
            ["true non-jammed", str(cm.tn), str(cm.fp)],
            ["true jammed", str(cm.fn), str(cm.tp)],
        ]
    )


def render_stationary(doc: dict) -> str:
    title = "Random forest with PCA" if doc["use_pca"] else "Random forest without PCA"
    metrics = {c: ClassMetrics(**doc["metrics"][c]) for c in CLASSES}
    rows = [
        ["Class", "Non-jammed", "Jammed"],
        ["Training set size", str(doc["train_counts"]["0"]), str(doc["train_counts"]["1"])],
        ["Testing set size", str(doc["test_counts"]["0"]), str(doc["test_counts"]["1"])],
    ] + _class_rows(metrics)
    cm = ConfusionMatrix(**doc["confusion"])
    lines = [
        f"== {title} (stationary) ==",
        _table(rows),
        render_confusion(cm),
        f"ROC AUC: {doc['auc']:.4f}",
        f"Training accuracy (%): {pct(doc['train_accuracy'])}",
    ]
    return "\n".join(lines) + "\n"


def render_adaptive(doc: dict) -> str:
    cm = ConfusionMatrix(**doc["confusion"])
    metrics = class_metrics(cm)
    rows = [
        ["Class", "Non-jammed", "Jammed"],
        ["Total prediction points", f"{cm.tn + cm.fp:,}", f"{cm.tp + cm.fn:,}"],
    ] + _class_rows(metrics)
    cfg = doc["config"]
    lines = [
        "== Adaptive threshold detector (time-variant) ==",
        f"window={cfg['window']} alpha={cfg['alpha']} beta={cfg['beta']} min_warmup={cfg['min_warmup']}",
        _table(rows),
        render_confusion(cm),
        f"Trajectories evaluated: {doc['n_trajectories']} (empty: {doc['empty_trajectories']})",
    ]
    return "\n".join(lines) + "\n"


def _pm(s: dict) -> str:
    if s["mean"] is None:
        return "undefined"
    return f"{100 * s['mean']:.2f} ± {100 * s['std']:.2f}"


def render_cross(doc: dict) -> str:
    rows = [
        ["Metric", "Value (± Standard Deviation)"],
        ["Accuracy (%)", _pm(doc["summary"]["accuracy"])],
        ["F1 Score (%)", _pm(doc["summary"]["f1"])],
    ]
    lines = [
        "== Stationary-trained forest (PCA) on time-variant trajectories ==",
        _table(rows),
        f"Trajectories evaluated: {doc['summary']['accuracy']['n_used']} "
        f"(empty: {doc['empty_trajectories']}, undefined F1: {doc['summary']['f1']['n_excluded']})",
    ]
    return "\n".join(lines) + "\n"


def render_comparison(doc: dict) -> str:
    with_pca, without = doc["with_pca"], doc["without_pca"]
    gap = 100 * (with_pca["accuracy"] - without["accuracy"])
    return (
        "== PCA effect on the stationary detector ==\n"
        f"accuracy with PCA (%): {pct(with_pca['accuracy'])}\n"
        f"accuracy without PCA (%): {pct(without['accuracy'])}\n"
        f"measured gap (pp): {gap:+.2f}\n"
    )


def render_calibration(doc: dict) -> str:
    best = doc["best"]
    return (
        "== Adaptive detector calibration ==\n"
        f"grid points: {len(doc['rows'])}\n"
        f"best: window={best['window']} alpha={best['alpha']} beta={best['beta']} "
        f"mean F1 (%)={pct(best['mean_f1'])} accuracy (%)={pct(best['accuracy'])}\n"
    )


RENDERERS = {
    "stationary": render_stationary,
    "adaptive": render_adaptive,
    "cross": render_cross,
    "comparison": render_comparison,
    "calibration": render_calibration,
}


def render(doc: dict) -> str:
    kind = doc.get("kind")
    if kind not in RENDERERS:
        raise ValueError(f"unknown report kind {kind!r}")
    return RENDERERS[kind](doc)


# -- machine-readable documents --------------------------------------------------


def _metrics_doc(metrics: dict[str, ClassMetrics]) -> dict:
    return {c: asdict(metrics[c]) for c in CLASSES}


def stationary_doc(res: StationaryResult) -> dict:
    return {
        "kind": "stationary",
        "use_pca": res.use_pca,
        "train_counts": {str(k): v for k, v in res.train_counts.items()},
        "test_counts": {str(k): v for k, v in res.test_counts.items()},
        "confusion": asdict(res.confusion),
        "metrics": _metrics_doc(res.metrics),
        "auc": res.roc.auc,
        "train_accuracy": res.train_accuracy,
    }


def adaptive_doc(res: AdaptiveResult) -> dict:
    return {
        "kind": "adaptive",
        "config": asdict(res.config),
        "confusion": asdict(res.confusion),
        "metrics": _metrics_doc(res.metrics),
        "summary": {k: asdict(v) for k, v in res.summary.items()},
        "n_trajectories": len(res.per_trajectory),
        "empty_trajectories": res.empty_trajectories,
    }


def cross_doc(res: CrossDomainResult) -> dict:
    return {
        "kind": "cross",
        "summary": {k: asdict(v) for k, v in res.summary.items()},
        "confusion": asdict(res.confusion),
        "per_trajectory": res.per_trajectory,
        "empty_trajectories": res.empty_trajectories,
    }


def metrics_csv(run: str, metrics: dict[str, ClassMetrics]) -> str:
    """Long-format CSV: run,class,metric,value (value empty when undefined)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "class", "metric", "value"])
    for c in CLASSES:
        for name, value in asdict(metrics[c]).items():
            w.writerow([run, c, name, "" if value is None else format(value, ".17g")])
    return buf.getvalue()


def roc_csv(curve: RocCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fpr", "tpr"])
    for t, f, p in zip(curve.thresholds, curve.fpr, curve.tpr):
        w.writerow([format(t, ".17g"), format(f, ".17g"), format(p, ".17g")])
    return buf.getvalue()
