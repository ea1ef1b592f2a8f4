"""Stationary-attack classifier: z-scoring, PCA and a Gini random forest.

Conventions pinned here (they decide every prediction bit-for-bit):

* PCA works on the population covariance of z-scored training features and
  is diagonalised with cyclic Jacobi rotations.  Each component is signed
  so that its largest-magnitude entry is positive.
* A tree node goes left iff ``x[feature] <= threshold``.  Thresholds are
  midpoints between consecutive distinct sorted values.  Ties in impurity
  keep the first candidate (feature draw order, then ascending threshold).
* Each node draws ``ceil(sqrt(d))`` candidate features without replacement.
  Nodes stop splitting at ``max_depth``, when pure, or below 2 samples.
* A leaf votes for its majority class; an exact tie inherits the parent's
  vote (the root falls back to non-jammed).  The forest score is the
  fraction of trees voting jammed and a record is jammed iff score > 0.5.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .seeding import STAGE_FOREST, derive_seed
from .signal import FEATURE_NAMES

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
MODEL_FORMAT = "geojam-stationary-model"
MODEL_VERSION = 1


# -- split -------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_indices: np.ndarray
    test_indices: np.ndarray
    train_counts: dict[int, int]
    test_counts: dict[int, int]


def train_test_split(labels, train_jammed: int = 1809, train_nonjammed: int = 2191, seed: int = 0) -> SplitSpec:
    """Stratified split with exact per-class training counts."""
    y = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    train, test = [], []
    train_counts, test_counts = {}, {}
    for cls, wanted in ((0, train_nonjammed), (1, train_jammed)):
        idx = np.flatnonzero(y == cls)
        if wanted > idx.size:
            raise ValueError(f"requested {wanted} training rows of class {cls}, only {idx.size} available")
        idx = rng.permutation(idx)
        train.append(idx[:wanted])
        test.append(idx[wanted:])
        train_counts[cls] = int(wanted)
        test_counts[cls] = int(idx.size - wanted)
    return SplitSpec(
        np.sort(np.concatenate(train)), np.sort(np.concatenate(test)), train_counts, test_counts
    )


# -- PCA ---------------------------------------------------------------------


def jacobi_eigh(matrix, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the Frobenius norm of the off-diagonal part drops below
    ``tol * max(1, ||A||_F)``.  Returns ``(eigenvalues, eigenvectors)`` with
    eigenvectors in columns, unsorted.
    """
    A = np.array(matrix, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise ValueError("jacobi_eigh needs a square symmetric matrix")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    limit = tol * max(1.0, float(np.linalg.norm(A)))
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off < limit:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) + 100.0 * abs(apq) == abs(diff):
                    t = apq / diff  # theta would overflow; tan of the small angle directly
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    raise ArithmeticError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


@dataclass(frozen=True)
class PcaModel:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    components: np.ndarray  # (n_components, d), orthonormal rows
    eigenvalues: np.ndarray  # all d, descending
    n_components: int
    degenerate_features: tuple[int, ...] = ()

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = self.eigenvalues.sum()
        return self.eigenvalues / total if total > 0 else np.zeros_like(self.eigenvalues)


def standardize(model: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.feature_means.size:
        raise ValueError(f"expected {model.feature_means.size} feature columns, got shape {X.shape}")
    return (X - model.feature_means) / model.feature_stds


def pca_fit(X, n_components: int = 1) -> PcaModel:
    """Fit z-scoring statistics and the leading principal directions.

    A zero-variance feature keeps std 1 (so it contributes nothing) and is
    listed in ``degenerate_features`` with a ``RuntimeWarning``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("pca_fit needs a 2-D matrix with at least 2 rows")
    d = X.shape[1]
    if not 1 <= n_components <= d:
        raise ValueError(f"n_components must be in [1, {d}]")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # a constant column can come out with a rounding-level std instead of 0
    flat = (stds == 0.0) | (stds <= 1e-12 * np.abs(means))
    degenerate = tuple(int(i) for i in np.flatnonzero(flat))
    if degenerate:
        warnings.warn(f"zero-variance feature column(s) {degenerate}; std set to 1", RuntimeWarning, stacklevel=2)
        stds = np.where(flat, 1.0, stds)
    Z = (X - means) / stds
    cov = Z.T @ Z / Z.shape[0]
    vals, vecs = jacobi_eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order].T
    for row in vecs:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(means, stds, vecs[:n_components].copy(), vals, n_components, degenerate)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    return standardize(model, X) @ model.components.T


# -- random forest -----------------------------------------------------------


def gini(counts) -> float:
    """Gini impurity ``1 - sum p_c**2`` of a class-count vector."""
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    if n == 0:
        return 0.0
    p = c / n
    return float(1.0 - np.sum(p * p))


@dataclass
class DecisionTree:
    """Flat binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (nodes, 2) class counts of the bootstrap rows reaching the node
    label: np.ndarray  # vote of each node if it were a leaf

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of X."""
        X = np.asarray(X, dtype=float)
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.where(internal, feat, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def predict(self, X) -> np.ndarray:
        return self.label[self.apply(X)]


def _best_split(X, y, idx, candidates):
    """Lowest weighted-Gini split over candidate features, or None."""
    n = idx.size
    best = None
    for f in candidates:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], y[idx][order]
        gaps = np.flatnonzero(xs[1:] > xs[:-1])
        if gaps.size == 0:
            continue
        ones_left = np.cumsum(ys)[gaps]
        n_left = gaps + 1.0
        n_right = n - n_left
        ones_right = ys.sum() - ones_left
        p_left = ones_left / n_left
        p_right = ones_right / n_right
        g_left = 2.0 * p_left * (1.0 - p_left)
        g_right = 2.0 * p_right * (1.0 - p_right)
        score = (n_left * g_left + n_right * g_right) / n
        k = int(np.argmin(score))
        if best is None or score[k] < best[0]:
            lo, hi = xs[gaps[k]], xs[gaps[k] + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:  # adjacent floats: midpoint rounded up
                thr = lo
            best = (float(score[k]), int(f), float(thr))
    return best


def fit_tree(X, y, max_depth: int, rng: np.random.Generator, n_candidates: int) -> DecisionTree:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    d = X.shape[1]
    feature, threshold, left, right, counts, label = [], [], [], [], [], []

    def grow(idx, depth, parent_label):
        node = len(feature)
        c1 = int(y[idx].sum())
        c0 = idx.size - c1
        vote = 1 if c1 > c0 else 0 if c0 > c1 else parent_label
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((c0, c1))
        label.append(vote)
        if depth >= max_depth or idx.size < 2 or c0 == 0 or c1 == 0:
            return node
        candidates = rng.choice(d, size=n_candidates, replace=False)
        split = _best_split(X, y, idx, candidates)
        if split is None:
            return node
        _, f, thr = split
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1, vote)
        right[node] = grow(idx[~go_left], depth + 1, vote)
        return node

    grow(np.arange(X.shape[0]), 0, 0)
    return DecisionTree(
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(counts, dtype=np.int64).reshape(-1, 2),
        np.array(label, dtype=np.int64),
    )


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    n_trees: int
    max_depth: int
    seed: int
    n_features: int
    degenerate: bool = False


def forest_fit(X, y, n_trees: int = 100, max_depth: int = 10, seed: int = 0) -> ForestModel:
    """Bootstrap-aggregated Gini trees; tree t draws from ``derive_seed(seed, STAGE_FOREST, t)``.

    A training set with a single class yields single-leaf trees and a
    forest flagged ``degenerate`` (with a ``RuntimeWarning``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.size or y.size < 2:
        raise ValueError("forest_fit needs matching X (n, d) and y (n,) with n >= 2")
    if n_trees < 1 or max_depth < 0:
        raise ValueError("n_trees must be >= 1 and max_depth >= 0")
    d = X.shape[1]
    n_candidates = math.ceil(math.sqrt(d))
    degenerate = np.unique(y).size < 2
    if degenerate:
        warnings.warn("single-class training data: forest degenerates to constant leaves", RuntimeWarning, stacklevel=2)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(derive_seed(seed, STAGE_FOREST, t))
        boot = rng.integers(0, y.size, size=y.size)
        trees.append(fit_tree(X[boot], y[boot], max_depth, rng, n_candidates))
    return ForestModel(trees, n_trees, max_depth, seed, d, bool(degenerate))


def forest_score(model: ForestModel, X) -> np.ndarray:
    """Fraction of trees voting jammed, per row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"forest expects {model.n_features} features, got {X.shape[1]}")
    votes = np.zeros(X.shape[0])
    for tree in model.trees:
        votes += tree.predict(X)
    return votes / model.n_trees


def forest_predict(model: ForestModel, X) -> np.ndarray:
    return (forest_score(model, X) > 0.5).astype(int)


# -- full pipeline -------------------------------------------------------------


@dataclass
class StationaryDetector:
    """z-score (+ optional PCA) followed by the forest."""

    pca: PcaModel
    forest: ForestModel
    use_pca: bool = True
    feature_names: tuple[str, ...] = field(default=FEATURE_NAMES)

    def transform(self, X) -> np.ndarray:
        return pca_transform(self.pca, X) if self.use_pca else standardize(self.pca, X)

    def score(self, X) -> np.ndarray:
        return forest_score(self.forest, self.transform(X))

    def predict(self, X) -> np.ndarray:
        return forest_predict(self.forest, self.transform(X))


def fit_detector(
    X, y, use_pca: bool = True, n_components: int = 1, n_trees: int = 100, max_depth: int = 10, seed: int = 0
) -> StationaryDetector:
    pca = pca_fit(X, n_components)
    Z = pca_transform(pca, X) if use_pca else standardize(pca, X)
    return StationaryDetector(pca, forest_fit(Z, y, n_trees, max_depth, seed), use_pca)


# -- persistence ---------------------------------------------------------------
#
# JSON document, floats in shortest round-trip repr (exact reload):
#   {"format", "version", "feature_names", "use_pca",
#    "pca": {"feature_means", "feature_stds", "components", "eigenvalues",
#            "n_components", "degenerate_features"},
#    "forest": {"n_trees", "max_depth", "seed", "n_features", "degenerate",
#               "trees": [{"feature", "threshold", "left", "right", "counts", "label"}]}}


def _tree_to_dict(tree: DecisionTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "counts": tree.counts.tolist(),
        "label": tree.label.tolist(),
    }


def _tree_from_dict(d: dict) -> DecisionTree:
    return DecisionTree(
        np.array(d["feature"], dtype=np.intp),
        np.array(d["threshold"], dtype=float),
        np.array(d["left"], dtype=np.intp),
        np.array(d["right"], dtype=np.intp),
        np.array(d["counts"], dtype=np.int64).reshape(-1, 2),
        np.array(d["label"], dtype=np.int64),
    )


def detector_to_json(det: StationaryDetector) -> str:
    p, f = det.pca, det.forest
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "feature_names": list(det.feature_names),
        "use_pca": det.use_pca,
        "pca": {
            "feature_means": p.feature_means.tolist(),
            "feature_stds": p.feature_stds.tolist(),
            "components": p.components.tolist(),
            "eigenvalues": p.eigenvalues.tolist(),
            "n_components": p.n_components,
            "degenerate_features": list(p.degenerate_features),
        },
        "forest": {
            "n_trees": f.n_trees,
            "max_depth": f.max_depth,
            "seed": f.seed,
            "n_features": f.n_features,
            "degenerate": f.degenerate,
            "trees": [_tree_to_dict(t) for t in f.trees],
        },
    }
    return json.dumps(doc, separators=(",", ":"))


def detector_from_json(text: str) -> StationaryDetector:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a stationary detector model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    p, f = doc["pca"], doc["forest"]
    pca = PcaModel(
        np.array(p["feature_means"], dtype=float),
        np.array(p["feature_stds"], dtype=float),
        np.array(p["components"], dtype=float).reshape(p["n_components"], -1),
        np.array(p["eigenvalues"], dtype=float),
        int(p["n_components"]),
        tuple(p["degenerate_features"]),
    )
    forest = ForestModel(
        [_tree_from_dict(t) for t in f["trees"]],
        int(f["n_trees"]),
        int(f["max_depth"]),
        int(f["seed"]),
        int(f["n_features"]),
        bool(f["degenerate"]),
    )
    return StationaryDetector(pca, forest, bool(doc["use_pca"]), tuple(doc["feature_names"]))


def save_detector(det: StationaryDetector, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(detector_to_json(det))
        fh.write("\n")


def load_detector(path) -> StationaryDetector:
    with open(path, encoding="utf-8") as fh:
        return detector_from_json(fh.read())
