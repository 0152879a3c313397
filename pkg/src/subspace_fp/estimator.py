"""scikit-learn style front end for the two-phase clustering pipeline."""
from __future__ import annotations

import time
from dataclasses import dataclass
from numbers import Integral, Real

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .assembly import ClusteringResult, assemble_clusters
from .base_search import (
    MembershipTable,
    SubspaceSet,
    build_membership,
    default_policy,
    enumerate_subspaces,
)
from .dataset import DataMatrix, zscore_normalize
from .fp_miner import build_fp_tree, knee_prune, min_count, mine_maximal, to_transactions

__all__ = ["FPSubspaceClustering", "cluster_membership", "sweep_k", "SweepEntry"]


def _check_int(name, value, low, high=None):
    if not isinstance(value, Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an int, got {value!r}")
    if value < low or (high is not None and value > high):
        bound = f"[{low}, {high}]" if high is not None else f">= {low}"
        raise ValueError(f"{name} must be {bound}, got {value}")


def cluster_membership(
    z: MembershipTable,
    support: int,
    min_ratio: float = 2.0,
    tie_break="lex",
    params: dict | None = None,
):
    """Phase 2 on a ready membership table.

    Returns ``(result, db, tree, pruned, patterns)``.
    """
    db = to_transactions(z)
    tree = build_fp_tree(db, support, tie_break=tie_break)
    pruned = knee_prune(tree, min_ratio)
    patterns = mine_maximal(pruned)
    result = assemble_clusters(patterns, db, z.subspaces, params)
    return result, db, tree, pruned, patterns


class FPSubspaceClustering(ClusterMixin, BaseEstimator):
    """Bottom-up subspace clustering through FP-tree pattern mining.

    Phase 1 runs k-means in many low-dimensional subspaces; phase 2 treats
    each point's base clusters as a transaction and reports every maximal
    frequent itemset of the knee-pruned FP-tree as one subspace cluster.
    Clusters may share points and dimensions.

    Parameters
    ----------
    k : int, default=10
        Base clusters per subspace.
    min_sup : float, optional
        Minimum cluster size as a fraction of ``n``. Exactly one of
        ``min_sup`` and ``min_cluster_size`` must be set; if neither is,
        ``min_sup=0.1`` is used.
    min_cluster_size : int, optional
        Minimum cluster size in points.
    p : int, default=2
        Dimensionality of the base subspaces.
    policy : {"auto", "all", "sample"}, default="auto"
        ``"auto"`` enumerates all pairs below 100 dimensions and samples
        otherwise.
    n_subspaces : int, optional
        Number of sampled subspaces; defaults to the fewest that reach
        ``coverage``.
    coverage : int, default=5
        Minimum number of sampled subspaces per dimension.
    min_base_size : int, optional
        Base clusters smaller than this are dropped; defaults to the
        minimum cluster size.
    n_init : int, default=1
        k-means restarts per subspace; the lowest sum of squares wins.
    trim : float, optional
        If set, a base-cluster member farther than ``trim`` times the
        cluster's median distance from its median point is dropped from that
        base cluster. Off by default; 4.0 is a good value for data with
        dense clusters inside uniform background noise.
    min_ratio : float, default=2.0
        Smallest count drop that counts as a knee when pruning the tree.
    tie_break : "lex" or sequence of items, default="lex"
        Order of items with equal support.
    normalize : bool, default=False
        z-score every column before clustering.
    random_state : int, default=0
    n_jobs : int, default=1
        Threads for phase 1; results do not depend on it.

    Attributes
    ----------
    result_ : ClusteringResult
    clusters_ : list of SubspaceCluster
    labels_ : ndarray of shape (n_samples,)
        Hard labels: the containing cluster with the longest pattern, or -1.
    membership_ : MembershipTable
    patterns_ : list of Pattern
    timings_ : dict
        Wall-clock seconds for ``phase1`` and ``phase2``.
    """

    def __init__(
        self,
        k=10,
        min_sup=None,
        min_cluster_size=None,
        p=2,
        policy="auto",
        n_subspaces=None,
        coverage=5,
        min_base_size=None,
        n_init=1,
        trim=None,
        min_ratio=2.0,
        tie_break="lex",
        normalize=False,
        random_state=0,
        n_jobs=1,
    ):
        self.k = k
        self.min_sup = min_sup
        self.min_cluster_size = min_cluster_size
        self.p = p
        self.policy = policy
        self.n_subspaces = n_subspaces
        self.coverage = coverage
        self.min_base_size = min_base_size
        self.n_init = n_init
        self.trim = trim
        self.min_ratio = min_ratio
        self.tie_break = tie_break
        self.normalize = normalize
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _validate_params(self, n, d, phase1=True):
        _check_int("k", self.k, 1, n if phase1 else None)
        _check_int("p", self.p, 1, d)
        _check_int("coverage", self.coverage, 1)
        _check_int("n_jobs", self.n_jobs, 1)
        _check_int("n_init", self.n_init, 1)
        if self.policy not in ("auto", "all", "sample"):
            raise ValueError(f"policy must be 'auto', 'all' or 'sample', got {self.policy!r}")
        if not isinstance(self.min_ratio, Real) or self.min_ratio < 1:
            raise ValueError(f"min_ratio must be a real >= 1, got {self.min_ratio!r}")
        if self.trim is not None and (not isinstance(self.trim, Real) or not self.trim >= 1):
            raise ValueError(f"trim must be a real >= 1, got {self.trim!r}")
        if self.min_sup is not None and self.min_cluster_size is not None:
            raise ValueError("set only one of min_sup and min_cluster_size")
        if self.min_cluster_size is not None:
            support = min_count(n, min_cluster_size=self.min_cluster_size)
        else:
            support = min_count(n, min_sup=0.1 if self.min_sup is None else self.min_sup)
        base = support if self.min_base_size is None else self.min_base_size
        _check_int("min_base_size", base, 1)
        return support, base

    def _subspaces(self, d) -> SubspaceSet:
        policy = self.policy
        if policy == "auto":
            policy = default_policy(d) if self.p == 2 else "sample"
        return enumerate_subspaces(
            d, p=self.p, policy=policy, count=self.n_subspaces,
            coverage=self.coverage, seed=self.random_state,
        )

    def params_dict(self, support) -> dict:
        tie = self.tie_break if isinstance(self.tie_break, str) else "explicit"
        return {
            "k": self.k,
            "min_count": support,
            "min_ratio": self.min_ratio,
            "p": self.p,
            "policy": self.policy,
            "seed": self.random_state,
            "tie_break": tie,
            "trim": self.trim,
            "n_init": self.n_init,
        }

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_features=2)
        n, d = X.shape
        support, base = self._validate_params(n, d)
        if self.normalize:
            X = zscore_normalize(DataMatrix(X)).values

        t0 = time.perf_counter()
        subspaces = self._subspaces(d)
        z = build_membership(
            X, subspaces, self.k, min_base_size=base,
            seed=self.random_state, threads=self.n_jobs,
            trim=self.trim, n_init=self.n_init,
        )
        t1 = time.perf_counter()
        self._fit_phase2(z, support)
        t2 = time.perf_counter()
        self.timings_ = {"phase1": t1 - t0, "phase2": t2 - t1}
        self.n_features_in_ = d
        return self

    def fit_membership(self, z: MembershipTable):
        """Run phase 2 only, on an injected membership table."""
        support, _ = self._validate_params(z.n, max(2, self.p), phase1=False)
        t0 = time.perf_counter()
        self._fit_phase2(z, support)
        self.timings_ = {"phase1": 0.0, "phase2": time.perf_counter() - t0}
        return self

    def _fit_phase2(self, z, support):
        result, db, tree, pruned, patterns = cluster_membership(
            z, support, self.min_ratio, self.tie_break, self.params_dict(support)
        )
        self.membership_ = z
        self.transactions_ = db
        self.tree_ = tree
        self.pruned_tree_ = pruned
        self.patterns_ = patterns
        self.result_ = result
        self.clusters_ = result.clusters
        self.labels_ = _hard_labels(result)

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    def predict(self, X=None):
        """Labels of the training points; the model does not extrapolate."""
        check_is_fitted(self, "result_")
        return self.labels_


def _hard_labels(result: ClusteringResult) -> np.ndarray:
    ranked = sorted(result.clusters, key=lambda c: (-len(c.pattern), -len(c.points), c.id))
    labels = np.full(result.n, -1, dtype=np.int64)
    for c in reversed(ranked):
        labels[list(c.points)] = c.id
    return labels


@dataclass
class SweepEntry:
    k: int
    n_clusters: int
    coverage: float
    estimator: FPSubspaceClustering


def sweep_k(estimator: FPSubspaceClustering, X, ks, score=None):
    """Fit a clone per ``k`` and keep the best.

    Without ``score`` the best run covers the most points (ties: smaller
    ``k``); ``score(estimator) -> float`` overrides that, e.g. NMI against
    known labels.
    """
    from sklearn.base import clone

    ks = list(ks)
    if not ks:
        raise ValueError("k sweep is empty")
    entries = []
    for k in ks:
        est = clone(estimator).set_params(k=k).fit(X)
        entries.append(SweepEntry(k, len(est.clusters_), est.result_.coverage, est))
    if score is None:
        key = lambda e: (e.coverage, -e.k)
    else:
        key = lambda e: (score(e.estimator), -e.k)
    best = max(entries, key=key)
    return best.estimator, entries
