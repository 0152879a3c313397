"""Clustering evaluation: NMI, pair counting and per-dimension coherence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import ClusteringResult, SubspaceCluster
from .dataset import GroundTruth

__all__ = [
    "nmi",
    "flatten_for_nmi",
    "pair_scores",
    "PairScores",
    "CoherenceProfile",
    "coherence_profile",
]


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(a, b, average: str = "arithmetic") -> float:
    """Normalized mutual information between two hard labelings.

    ``average`` picks the normalizer: ``"arithmetic"`` (mean of the two
    entropies) or ``"geometric"``. Two single-cluster labelings score 1; one
    single-cluster labeling against anything else scores 0.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label arrays differ in shape: {a.shape} vs {b.shape}")
    n = len(a)
    if n == 0:
        raise ValueError("empty labelings")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    ca = np.bincount(ia)
    cb = np.bincount(ib)
    ha = _entropy(ca, n)
    hb = _entropy(cb, n)
    if ha == 0.0 or hb == 0.0:
        return 1.0 if ha == hb else 0.0

    joint = np.bincount(ia * len(cb) + ib, minlength=len(ca) * len(cb)).reshape(len(ca), len(cb))
    rows, cols = np.nonzero(joint)
    nij = joint[rows, cols].astype(float)
    mi = float((nij / n * np.log(n * nij / (ca[rows] * cb[cols]))).sum())
    if average == "arithmetic":
        norm = (ha + hb) / 2.0
    elif average == "geometric":
        norm = float(np.sqrt(ha * hb))
    else:
        raise ValueError(f"unknown average {average!r}")
    return float(min(max(mi / norm, 0.0), 1.0))


def flatten_for_nmi(r: ClusteringResult, n: int | None = None) -> np.ndarray:
    """Hard labels from possibly overlapping clusters.

    A point takes the id of its containing cluster with the longest pattern
    (ties: more points, then smaller id). Outliers get distinct labels
    counting up from ``max id + 1``.
    """
    n = r.n if n is None else n
    ranked = sorted(r.clusters, key=lambda c: (-len(c.pattern), -len(c.points), c.id))
    labels = np.full(n, -1, dtype=np.int64)
    for c in reversed(ranked):
        labels[list(c.points)] = c.id
    next_label = max((c.id for c in r.clusters), default=-1) + 1
    for i in np.flatnonzero(labels < 0):
        labels[i] = next_label
        next_label += 1
    return labels


def _point_sets(x) -> list[frozenset]:
    if isinstance(x, ClusteringResult):
        return [frozenset(c.points) for c in x.clusters]
    if isinstance(x, GroundTruth):
        return [points for points, _ in x.clusters]
    return [frozenset(s) for s in x]


def _size(x) -> int | None:
    return getattr(x, "n", None)


def _membership(sets, n) -> np.ndarray:
    m = np.zeros((n, max(len(sets), 1)), dtype=np.float32)
    for c, s in enumerate(sets):
        m[list(s), c] = 1.0
    return m


@dataclass(frozen=True)
class PairScores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1))


def pair_scores(pred, truth, n: int | None = None, block: int = 2048) -> PairScores:
    """Pair-counting precision/recall/F1 over all unordered point pairs.

    Two points are co-clustered when they share at least one cluster, so
    overlapping clusterings are handled. ``0/0`` scores are reported as 0.
    """
    n_pred, n_truth = _size(pred), _size(truth)
    if n_pred is not None and n_truth is not None and n_pred != n_truth:
        raise ValueError(f"prediction covers {n_pred} points, truth {n_truth}")
    n = n if n is not None else (n_pred if n_pred is not None else n_truth)
    if n is None:
        raise ValueError("number of points unknown; pass n")
    mp = _membership(_point_sets(pred), n)
    mt = _membership(_point_sets(truth), n)
    tp = fp = fn = 0
    for start in range(0, n, block):
        stop = min(start + block, n)
        co_p = (mp[start:stop] @ mp.T) > 0
        co_t = (mt[start:stop] @ mt.T) > 0
        # keep pairs (i, j) with i < j
        upper = np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        co_p &= upper
        co_t &= upper
        tp += int(np.count_nonzero(co_p & co_t))
        fp += int(np.count_nonzero(co_p & ~co_t))
        fn += int(np.count_nonzero(~co_p & co_t))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PairScores(precision, recall, f1, tp, fp, fn)


@dataclass(frozen=True)
class CoherenceProfile:
    means: np.ndarray
    stds: np.ndarray
    flagged: np.ndarray

    @property
    def flagged_std(self) -> float:
        return float(self.stds[self.flagged].mean()) if self.flagged.any() else float("nan")

    @property
    def unflagged_std(self) -> float:
        return float(self.stds[~self.flagged].mean()) if (~self.flagged).any() else float("nan")


def coherence_profile(c: SubspaceCluster, X) -> CoherenceProfile:
    """Per-dimension mean and std of ``X`` over the cluster's points."""
    values = np.asarray(getattr(X, "values", X), dtype=float)
    rows = values[list(c.points)]
    flagged = np.zeros(values.shape[1], dtype=bool)
    flagged[list(c.dims)] = True
    return CoherenceProfile(rows.mean(axis=0), rows.std(axis=0), flagged)
