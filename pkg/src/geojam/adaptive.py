"""Moving-window adaptive thresholds for time-variant jamming detection.

For epoch ``k`` the statistics come from the trailing window of up to ``W``
earlier samples, indices ``max(0, k - W) .. k - 1``; the current sample is
never part of its own window.  Both series are in dB.  An epoch is flagged
when any of these strict conditions holds::

    SJNR(k) < mean_SJNR - alpha * std_SJNR
    RSS(k)  > mean_RSS  + alpha * std_RSS
    |SJNR(k) - SJNR(k-1)| > beta_sjnr
    |RSS(k)  - RSS(k-1)|  > beta_rss

Epochs with fewer than ``min_warmup`` prior samples (always including
epoch 0) are predicted non-jammed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class AdaptiveConfig:
    # defaults chosen by ``calibrate`` over DEFAULT_GRID on the default
    # time-variant dataset (seed 0); see configs/default.conf
    window: int = 10
    alpha: float = 0.0
    beta: float = 100.0  # dB
    min_warmup: int = 5
    beta_sjnr: float | None = None  # per-feature overrides of beta
    beta_rss: float | None = None

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        for name in ("beta", "beta_sjnr", "beta_rss"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.min_warmup < 1:
            raise ValueError("min_warmup must be at least 1")

    @property
    def rate_limits(self) -> tuple[float, float]:
        bs = self.beta if self.beta_sjnr is None else self.beta_sjnr
        br = self.beta if self.beta_rss is None else self.beta_rss
        return bs, br


@dataclass(frozen=True)
class DetectionTrace:
    """Per-epoch detector internals; undefined entries (epoch 0) are NaN."""

    threshold_sjnr: np.ndarray
    threshold_rss: np.ndarray
    delta_sjnr: np.ndarray
    delta_rss: np.ndarray
    flag_threshold: np.ndarray
    flag_rate: np.ndarray
    predicted: np.ndarray


def moving_stats(series, k: int, window: int) -> tuple[float, float]:
    """Mean and population std of ``series[max(0, k - window):k]``."""
    if k < 1:
        raise ValueError("epoch 0 has no trailing window")
    w = np.asarray(series[max(0, k - window) : k], dtype=float)
    return float(w.mean()), float(w.std())


def rolling_stats(series, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Trailing-window mean and std for every epoch (NaN at epoch 0)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    mean = np.full(n, np.nan)
    std = np.full(n, np.nan)
    # growing windows for k < window
    for k in range(1, min(window, n)):
        mean[k] = x[:k].mean()
        std[k] = x[:k].std()
    if n > window:
        full = sliding_window_view(x[:-1], window)  # row j covers x[j : j + window]
        mean[window:] = full.mean(axis=1)
        std[window:] = full.std(axis=1)
    return mean, std


def thresholds(mean_s, std_s, mean_r, std_r, alpha):
    return mean_s - alpha * std_s, mean_r + alpha * std_r


def deltas(series, k: int) -> float:
    if k < 1:
        raise ValueError("delta needs a previous sample")
    return abs(float(series[k]) - float(series[k - 1]))


def _delta_series(x: np.ndarray) -> np.ndarray:
    d = np.full(x.size, np.nan)
    d[1:] = np.abs(np.diff(x))
    return d


def _flags(sjnr, rss, stats, alpha, beta_s, beta_r, min_warmup):
    (ms, ss), (mr, sr), ds, dr = stats
    thr_s, thr_r = thresholds(ms, ss, mr, sr, alpha)
    live = np.arange(sjnr.size) >= max(1, min_warmup)
    with np.errstate(invalid="ignore"):
        flag_thr = live & ((sjnr < thr_s) | (rss > thr_r))
        flag_rate = live & ((ds > beta_s) | (dr > beta_r))
    return thr_s, thr_r, flag_thr, flag_rate


def _prepare(sjnr_series, rss_series, window):
    sjnr = np.asarray(sjnr_series, dtype=float)
    rss = np.asarray(rss_series, dtype=float)
    if sjnr.shape != rss.shape or sjnr.ndim != 1:
        raise ValueError(f"series length mismatch: {sjnr.shape} vs {rss.shape}")
    if sjnr.size < 1:
        raise ValueError("series must contain at least one epoch")
    stats = (rolling_stats(sjnr, window), rolling_stats(rss, window), _delta_series(sjnr), _delta_series(rss))
    return sjnr, rss, stats


def detect(sjnr_series, rss_series, config: AdaptiveConfig) -> DetectionTrace:
    sjnr, rss, stats = _prepare(sjnr_series, rss_series, config.window)
    beta_s, beta_r = config.rate_limits
    thr_s, thr_r, flag_thr, flag_rate = _flags(sjnr, rss, stats, config.alpha, beta_s, beta_r, config.min_warmup)
    return DetectionTrace(
        thr_s, thr_r, stats[2], stats[3], flag_thr, flag_rate, (flag_thr | flag_rate).astype(int)
    )


# -- calibration ---------------------------------------------------------------

DEFAULT_GRID = {
    "windows": (5, 10, 20, 30, 40, 60),
    "alphas": (0.0, 0.5, 1.0, 1.5, 2.0, 3.0),
    "betas": (1.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0),
}


@dataclass(frozen=True)
class CalibrationRow:
    window: int
    alpha: float
    beta: float
    mean_f1: float
    accuracy: float
    n_scored: int  # trajectories with a defined F1


def _f1(y_true: np.ndarray, y_pred: np.ndarray) -> float | None:
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    if tp + fp == 0 or tp + fn == 0:
        return None
    p, r = tp / (tp + fp), tp / (tp + fn)
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def calibrate(trajectories, windows, alphas, betas, min_warmup: int = 5):
    """Exhaustive grid search for the config with the best mean per-trajectory F1.

    ``trajectories`` is a sequence of ``(sjnr_db, rss_db, labels)`` triples.
    F1 is that of the jammed class; trajectories where it is undefined are
    left out of the mean.  Ties go to the lexicographically smallest
    ``(window, alpha, beta)``.  Returns ``(best_config, rows)`` with one row
    per grid point in ascending grid order.
    """
    data = [
        (np.asarray(s, dtype=float), np.asarray(r, dtype=float), np.asarray(y, dtype=int))
        for s, r, y in trajectories
        if len(y) > 0
    ]
    if not data:
        raise ValueError("calibration needs at least one non-empty labeled trajectory")
    windows, alphas, betas = sorted(set(windows)), sorted(set(alphas)), sorted(set(betas))
    if not (windows and alphas and betas):
        raise ValueError("every grid axis needs at least one value")
    rows = []
    for w in windows:
        prepared = [_prepare(s, r, w) for s, r, _ in data]
        for a, b in itertools.product(alphas, betas):
            AdaptiveConfig(w, a, b, min_warmup)  # validates the grid point
            f1s, correct, total = [], 0, 0
            for (sjnr, rss, stats), (_, _, y) in zip(prepared, data):
                _, _, ft, fr = _flags(sjnr, rss, stats, a, b, b, min_warmup)
                pred = (ft | fr).astype(int)
                f = _f1(y, pred)
                if f is not None:
                    f1s.append(f)
                correct += int(np.sum(pred == y))
                total += y.size
            mean_f1 = float(np.mean(f1s)) if f1s else float("nan")
            rows.append(CalibrationRow(w, float(a), float(b), mean_f1, correct / total, len(f1s)))
    best = None
    for row in rows:  # rows are already in lexicographic grid order
        if np.isnan(row.mean_f1):
            continue
        if best is None or row.mean_f1 > best.mean_f1:
            best = row
    if best is None:
        best = rows[0]
    return AdaptiveConfig(best.window, best.alpha, best.beta, min_warmup), rows
