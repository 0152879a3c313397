"""Phase 1: base clusters in low-dimensional subspaces.

Every subspace is clustered independently with k-means; the per-point labels
are stacked column by column into the membership table ``Z`` that phase 2
reads as a transaction database.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

__all__ = [
    "ABSENT",
    "SubspaceSet",
    "MembershipTable",
    "enumerate_subspaces",
    "default_policy",
    "cluster_base",
    "trim_far_members",
    "build_membership",
]

#: Marker for "no base cluster" cells of the membership table.
ABSENT = -1

MAX_KMEANS_ITER = 100
MAX_SAMPLE_ATTEMPTS = 50


@dataclass(frozen=True)
class SubspaceSet:
    subspaces: tuple[tuple[int, ...], ...]
    p: int

    def __post_init__(self):
        if len(set(self.subspaces)) != len(self.subspaces):
            raise ValueError("duplicate subspaces")
        for s in self.subspaces:
            if len(s) != self.p or len(set(s)) != self.p or list(s) != sorted(s):
                raise ValueError(f"subspace {s} is not a sorted set of {self.p} dims")

    def __len__(self) -> int:
        return len(self.subspaces)

    def __iter__(self):
        return iter(self.subspaces)

    def __getitem__(self, j):
        return self.subspaces[j]

    def coverage(self, d: int) -> np.ndarray:
        """Number of subspaces each of the ``d`` dimensions belongs to."""
        counts = np.zeros(d, dtype=int)
        for s in self.subspaces:
            counts[list(s)] += 1
        return counts


@dataclass
class MembershipTable:
    """``n x m`` table of base-cluster ids; :data:`ABSENT` marks empty cells."""

    labels: np.ndarray
    subspaces: SubspaceSet

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 2 or self.labels.shape[1] != len(self.subspaces):
            raise ValueError(
                f"table shape {self.labels.shape} does not match "
                f"{len(self.subspaces)} subspaces"
            )

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def m(self) -> int:
        return self.labels.shape[1]

    def to_csv(self, fh) -> None:
        fh.write(",".join("S" + "-".join(map(str, s)) for s in self.subspaces) + "\n")
        for row in self.labels:
            fh.write(",".join("" if v == ABSENT else str(v) for v in row) + "\n")

    @classmethod
    def from_csv(cls, fh) -> "MembershipTable":
        """Read the format written by :meth:`to_csv`.

        The header names each subspace as ``S`` followed by its dimensions
        joined with ``-``; an empty cell is :data:`ABSENT`.
        """
        lines = [line.rstrip("\r\n") for line in fh]
        if not lines or not lines[0].strip():
            raise ValueError("membership table is empty")
        subspaces = []
        for name in lines[0].split(","):
            name = name.strip()
            try:
                if not name.startswith("S"):
                    raise ValueError
                subspaces.append(tuple(int(j) for j in name[1:].split("-")))
            except ValueError:
                raise ValueError(f"line 1: bad subspace name {name!r}") from None
        p = len(subspaces[0])
        rows = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            cells = line.split(",")
            if len(cells) != len(subspaces):
                raise ValueError(f"line {lineno}: expected {len(subspaces)} cells, got {len(cells)}")
            try:
                rows.append([int(c) if c.strip() else ABSENT for c in cells])
            except ValueError:
                raise ValueError(f"line {lineno}: cluster ids must be integers") from None
        if any(v < 0 and v != ABSENT for row in rows for v in row):
            raise ValueError("cluster ids must be non-negative")
        labels = np.array(rows, dtype=np.int64).reshape(len(rows), len(subspaces))
        return cls(labels, SubspaceSet(tuple(subspaces), p))


def default_policy(d: int) -> str:
    return "all" if d < 100 else "sample"


def enumerate_subspaces(
    d: int,
    p: int = 2,
    policy: str = "all",
    count: int | None = None,
    coverage: int = 5,
    seed: int = 0,
) -> SubspaceSet:
    """All pairs of dimensions, or a seeded sample of ``count`` p-subsets.

    The sample is built greedily: each new subset takes the least covered
    dimensions (random tie-break) until every dimension lies in at least
    ``coverage`` subspaces; the rest are drawn uniformly.
    """
    if not 1 <= p <= d:
        raise ValueError(f"need 1 <= p <= d, got p={p}, d={d}")
    if policy == "all":
        if p != 2:
            raise ValueError("policy 'all' only enumerates 2-D subspaces")
        return SubspaceSet(tuple(combinations(range(d), 2)), p)
    if policy != "sample":
        raise ValueError(f"unknown subspace policy {policy!r}")

    total = math.comb(d, p)
    needed = math.ceil(coverage * d / p)
    if count is None:
        count = needed
    if count < needed:
        raise ValueError(
            f"{count} subspaces cannot cover each of {d} dims {coverage} times "
            f"(need at least {needed})"
        )
    if count > total:
        raise ValueError(f"only {total} distinct {p}-subspaces exist, asked for {count}")

    for attempt in range(MAX_SAMPLE_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        chosen = _covering_subsets(d, p, count, coverage, rng)
        if chosen is not None:
            break
    else:
        raise RuntimeError("could not satisfy subspace coverage")
    while len(chosen) < count:
        s = tuple(sorted(rng.choice(d, size=p, replace=False).tolist()))
        chosen.setdefault(s, None)
    return SubspaceSet(tuple(chosen), p)


def _covering_subsets(d, p, count, coverage, rng) -> dict | None:
    chosen: dict[tuple[int, ...], None] = {}
    hits = np.zeros(d, dtype=int)
    while hits.min() < coverage:
        if len(chosen) >= count:
            return None
        order = np.lexsort((rng.random(d), hits)).tolist()
        lead = order[0]
        pick = None
        for rest in combinations(order[1:], p - 1):
            cand = tuple(sorted((lead, *rest)))
            if cand not in chosen:
                pick = cand
                break
        if pick is None:
            return None
        chosen[pick] = None
        hits[list(pick)] += 1
    return chosen


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        cum = np.cumsum(d2)
        if cum[-1] > 0:
            idx = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), n - 1)
        else:
            idx = rng.integers(n)
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def _nearest(points: np.ndarray, centers: np.ndarray, block: int = 8192) -> np.ndarray:
    """Index of the nearest center per point.

    The per-point term of the squared distance does not change the argmin
    and is left out; rows go in blocks so the temporaries stay in cache.
    """
    shift = (centers * centers).sum(axis=1)
    scale = -2.0 * centers.T
    out = np.empty(len(points), dtype=np.int64)
    for start in range(0, len(points), block):
        d = points[start:start + block] @ scale
        d += shift
        out[start:start + block] = d.argmin(axis=1)
    return out


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    n = len(points)
    centers = _kmeans_pp(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(MAX_KMEANS_ITER):
        new = _nearest(points, centers)
        sizes = np.bincount(new, minlength=k)
        if (sizes == 0).any():
            own = ((points - centers[new]) ** 2).sum(axis=1)
            moved = np.zeros(n, dtype=bool)
            for c in np.flatnonzero(sizes == 0):
                # farthest point whose own cluster can spare it
                spare = ~moved & (sizes[new] > 1)
                far = int(np.flatnonzero(spare)[own[spare].argmax()])
                sizes[new[far]] -= 1
                new[far] = c
                sizes[c] = 1
                moved[far] = True
        if np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=k)
        for j in range(points.shape[1]):
            centers[:, j] = np.bincount(labels, weights=points[:, j], minlength=k) / counts
    inertia = float(((points - centers[labels]) ** 2).sum())
    return labels, inertia


def cluster_base(points, k: int, seed: int = 0, n_init: int = 1) -> np.ndarray:
    """Lloyd's k-means with k-means++ seeding; returns labels in ``[0, k)``.

    Stops after 100 iterations or when no assignment changes. An emptied
    cluster is re-seeded at the point farthest from its own centroid. With
    ``n_init > 1`` the run with the smallest within-cluster sum of squares
    wins (ties: the earliest run).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")
    if k == 1:
        return np.zeros(n, dtype=np.int64)

    rng = np.random.default_rng(seed)
    best, best_inertia = None, math.inf
    for _ in range(n_init):
        labels, inertia = _lloyd(points, k, rng)
        if inertia < best_inertia:
            best, best_inertia = labels, inertia
    return best


def trim_far_members(points: np.ndarray, labels: np.ndarray, k: int, factor: float) -> np.ndarray:
    """Mark members far from the bulk of their base cluster as absent.

    Distances are taken from the cluster's coordinate-wise median, which a
    dense core keeps in place even when a k-means cell also swept up a wide
    stretch of background. A member farther than ``factor`` times the
    cluster's median distance is dropped. A cell of evenly spread points
    loses nothing for any ``factor`` above about 1.5.
    """
    out = labels.copy()
    for c in range(k):
        members = np.flatnonzero(labels == c)
        if len(members) == 0:
            continue
        sub = points[members]
        dist = np.sqrt(((sub - np.median(sub, axis=0)) ** 2).sum(axis=1))
        out[members[dist > factor * np.median(dist)]] = ABSENT
    return out


def _column(values, dims, k, min_base_size, seed, trim=None, n_init=1) -> np.ndarray:
    points = values[:, list(dims)]
    labels = cluster_base(points, k, seed=seed, n_init=n_init)
    if trim is not None:
        labels = trim_far_members(points, labels, k, trim)
    sizes = np.bincount(labels[labels >= 0], minlength=k)
    small = sizes < min_base_size
    if small.any():
        labels = np.where((labels >= 0) & small[np.maximum(labels, 0)], ABSENT, labels)
    return labels


def build_membership(
    X,
    subspaces: SubspaceSet,
    k: int,
    min_base_size: int = 1,
    seed: int = 0,
    threads: int = 1,
    trim: float | None = None,
    n_init: int = 1,
) -> MembershipTable:
    """Cluster ``X`` in every subspace and collect the labels into ``Z``.

    Column ``j`` is seeded with ``seed ^ j`` so the table does not depend on
    the order or parallelism in which columns are computed. With ``trim``
    set, far members of each base cluster are dropped first (see
    :func:`trim_far_members`); the size filter then counts what is left.
    """
    if min_base_size < 1:
        raise ValueError("min_base_size must be >= 1")
    if trim is not None and not trim >= 1:
        raise ValueError(f"trim must be >= 1, got {trim!r}")
    values = np.asarray(getattr(X, "values", X), dtype=float)
    jobs = [(values, s, k, min_base_size, seed ^ j, trim, n_init) for j, s in enumerate(subspaces)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            columns = list(pool.map(lambda a: _column(*a), jobs))
    else:
        columns = [_column(*a) for a in jobs]
    if columns:
        table = np.column_stack(columns)
    else:
        table = np.empty((len(values), 0), dtype=np.int64)
    return MembershipTable(table, subspaces)
