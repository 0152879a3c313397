"""Data ingestion, normalization and synthetic benchmark generation.

All randomness goes through :func:`numpy.random.default_rng`, i.e. the PCG64
bit generator, so a given seed reproduces the same bytes on every platform.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DataMatrix",
    "GroundTruth",
    "ClusterSpec",
    "SyntheticSpec",
    "DataError",
    "SpecError",
    "load_matrix",
    "save_matrix",
    "zscore_normalize",
    "generate_synthetic",
    "generate_covariant_fixture",
    "load_synthetic_spec",
    "save_ground_truth",
    "load_ground_truth",
    "disjoint_spec",
    "non_disjoint_spec",
    "covariant_truth",
    "bench_spec",
]

COVARIANT_MEANS = (1.0, 7.0, 10.0)
COVARIANT_VARIANCE = 2.0


class DataError(ValueError):
    """Raised when a data file cannot be parsed into a matrix."""


class SpecError(ValueError):
    """Raised for an invalid synthetic data specification."""


@dataclass
class DataMatrix:
    values: np.ndarray
    names: list[str] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"expected a 2-D grid, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 2:
            raise DataError(f"need n >= 1 and d >= 2, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("matrix contains NaN or infinite values")
        self.values = values
        if self.names is None:
            self.names = [f"d{j}" for j in range(values.shape[1])]
        elif len(self.names) != values.shape[1]:
            raise DataError(
                f"{len(self.names)} column names for {values.shape[1]} columns"
            )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class GroundTruth:
    """Planted subspace clusters: ``(points, dims)`` pairs plus outliers.

    Point and dimension sets may overlap between clusters.
    """

    n: int
    clusters: list[tuple[frozenset[int], frozenset[int]]] = field(default_factory=list)

    @property
    def outliers(self) -> frozenset[int]:
        covered = set()
        for points, _ in self.clusters:
            covered |= points
        return frozenset(range(self.n)) - covered

    def labels(self, outliers: str = "negative") -> np.ndarray:
        """Per-point class labels; a point in several clusters takes the first.

        Points in no cluster get -1 (``outliers="negative"``) or distinct
        labels counting up from the number of clusters (``"singleton"``),
        which is how :func:`~subspace_fp.metrics.flatten_for_nmi` treats
        unclustered points on the predicted side.
        """
        out = np.full(self.n, -1, dtype=int)
        for c, (points, _) in reversed(list(enumerate(self.clusters))):
            out[sorted(points)] = c
        if outliers == "singleton":
            loose = np.flatnonzero(out < 0)
            out[loose] = len(self.clusters) + np.arange(len(loose))
        elif outliers != "negative":
            raise ValueError(f"unknown outlier mode {outliers!r}")
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "clusters": [
                {"points": sorted(p), "dims": sorted(d)} for p, d in self.clusters
            ],
            "outliers": sorted(self.outliers),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        clusters = [
            (frozenset(c["points"]), frozenset(c.get("dims", ())))
            for c in doc["clusters"]
        ]
        return cls(n=int(doc["n"]), clusters=clusters)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "GroundTruth":
        """Build a truth from per-point class labels (negative = outlier)."""
        labels = np.asarray(labels)
        clusters = []
        for lab in sorted(set(labels.tolist())):
            if lab < 0:
                continue
            clusters.append((frozenset(np.flatnonzero(labels == lab).tolist()), frozenset()))
        return cls(n=len(labels), clusters=clusters)


@dataclass
class ClusterSpec:
    start: int
    stop: int
    dims: list[int]
    means: list[float]
    stds: list[float]

    def __post_init__(self):
        self.dims = [int(j) for j in self.dims]
        if len(self.means) != len(self.dims) or len(self.stds) != len(self.dims):
            raise SpecError("means and stds must have one entry per cluster dimension")
        if len(set(self.dims)) != len(self.dims):
            raise SpecError(f"duplicate dimensions in cluster: {self.dims}")


@dataclass
class SyntheticSpec:
    n: int
    d: int
    clusters: list[ClusterSpec] = field(default_factory=list)
    noise_range: tuple[float, float] | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1 or self.d < 2:
            raise SpecError(f"need n >= 1 and d >= 2, got n={self.n}, d={self.d}")
        for c, cl in enumerate(self.clusters):
            if not 0 <= cl.start < cl.stop <= self.n:
                raise SpecError(f"cluster {c}: point range [{cl.start}, {cl.stop}) outside [0, {self.n})")
            bad = [j for j in cl.dims if not 0 <= j < self.d]
            if bad:
                raise SpecError(f"cluster {c}: dimensions {bad} outside [0, {self.d})")
            for other, ol in enumerate(self.clusters[:c]):
                rows = range(max(cl.start, ol.start), min(cl.stop, ol.stop))
                cols = sorted(set(cl.dims) & set(ol.dims))
                if len(rows) and cols:
                    raise SpecError(
                        f"clusters {other} and {c} both claim cell "
                        f"(point {rows[0]}, dim {cols[0]})"
                    )

    def background_range(self) -> tuple[float, float]:
        if self.noise_range is not None:
            return tuple(self.noise_range)
        if not self.clusters:
            return (0.0, 1.0)
        means = [m for cl in self.clusters for m in cl.means]
        spread = 3.0 * max(s for cl in self.clusters for s in cl.stds)
        return (min(means) - spread, max(means) + spread)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "seed": self.seed,
            "noise_range": list(self.noise_range) if self.noise_range else None,
            "clusters": [
                {
                    "points": [cl.start, cl.stop],
                    "dims": cl.dims,
                    "means": list(cl.means),
                    "stds": list(cl.stds),
                }
                for cl in self.clusters
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticSpec":
        try:
            clusters = []
            for c in doc.get("clusters", []):
                dims = c["dims"]
                means = c["means"]
                stds = c["stds"]
                if not isinstance(means, list):
                    means = [means] * len(dims)
                if not isinstance(stds, list):
                    stds = [stds] * len(dims)
                start, stop = c["points"]
                clusters.append(ClusterSpec(int(start), int(stop), dims, means, stds))
            noise = doc.get("noise_range")
            spec = cls(
                n=int(doc["n"]),
                d=int(doc["d"]),
                clusters=clusters,
                noise_range=tuple(noise) if noise else None,
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"malformed synthetic spec: {exc!r}") from exc
        spec.validate()
        return spec


def load_matrix(source, has_header: bool = False, delimiter: str = ",") -> DataMatrix:
    """Parse delimited text into a :class:`DataMatrix`.

    ``source`` may be a path or an open text stream. Rows and columns in error
    messages are 1-based, counting data rows only.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return load_matrix(fh, has_header=has_header, delimiter=delimiter)

    reader = csv.reader(source, delimiter=delimiter)
    names = None
    rows: list[list[float]] = []
    width = None
    for lineno, raw in enumerate(reader, start=1):
        if not raw or all(not f.strip() for f in raw):
            continue
        if has_header and names is None:
            names = [f.strip() for f in raw]
            width = len(names)
            continue
        if width is None:
            width = len(raw)
        elif len(raw) != width:
            raise DataError(f"line {lineno}: expected {width} fields, found {len(raw)}")
        row = []
        for col, field_ in enumerate(raw, start=1):
            text = field_.strip()
            try:
                value = float(text)
            except ValueError:
                raise DataError(
                    f"row {len(rows) + 1}, column {col}: non-numeric value {text!r}"
                ) from None
            if not np.isfinite(value):
                raise DataError(
                    f"row {len(rows) + 1}, column {col}: missing or non-finite value {text!r}"
                )
            row.append(value)
        rows.append(row)
    if not rows:
        raise DataError("input contains no data rows")
    return DataMatrix(np.array(rows, dtype=float), names)


def save_matrix(m: DataMatrix, target, delimiter: str = ",", header: bool = True) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            return save_matrix(m, fh, delimiter=delimiter, header=header)
    writer = csv.writer(target, delimiter=delimiter, lineterminator="\n")
    if header:
        writer.writerow(m.names)
    for row in m.values:
        writer.writerow([repr(float(v)) for v in row])


def zscore_normalize(m: DataMatrix) -> DataMatrix:
    """Standardize each column with the population std; constant columns -> 0."""
    v = m.values
    mean = v.mean(axis=0)
    std = v.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    out = np.where(std > 0, (v - mean) / safe, 0.0)
    return DataMatrix(out, list(m.names))


def generate_synthetic(spec: SyntheticSpec) -> tuple[DataMatrix, GroundTruth]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    low, high = spec.background_range()
    values = rng.uniform(low, high, size=(spec.n, spec.d))
    clusters = []
    for cl in spec.clusters:
        size = cl.stop - cl.start
        block = rng.normal(cl.means, cl.stds, size=(size, len(cl.dims)))
        values[cl.start:cl.stop, cl.dims] = block
        clusters.append((frozenset(range(cl.start, cl.stop)), frozenset(cl.dims)))
    return DataMatrix(values), GroundTruth(spec.n, clusters)


def generate_covariant_fixture(mode: str, seed: int = 0) -> DataMatrix:
    """300 points in 3 dimensions built from three normals of variance 2.

    ``covariant``: every coordinate of a point comes from the normal of its
    third, so each third is a genuine 3-D cluster.
    ``independent-dense``: third ``j`` is dense only in dimension ``j``; its
    other coordinates are uniform over the mixture's range, so no 3-D cluster
    exists.
    """
    rng = np.random.default_rng(seed)
    means = np.repeat(COVARIANT_MEANS, 100)
    std = np.sqrt(COVARIANT_VARIANCE)
    if mode == "covariant":
        return DataMatrix(rng.normal(means[:, None], std, size=(300, 3)))
    if mode == "independent-dense":
        low = min(COVARIANT_MEANS) - 3 * std
        high = max(COVARIANT_MEANS) + 3 * std
        values = rng.uniform(low, high, size=(300, 3))
        for j, mu in enumerate(COVARIANT_MEANS):
            values[100 * j:100 * (j + 1), j] = rng.normal(mu, std, size=100)
        return DataMatrix(values)
    raise ValueError(f"unknown fixture mode {mode!r}")


def covariant_truth(mode: str) -> GroundTruth:
    """The three generating thirds of :func:`generate_covariant_fixture`.

    In ``covariant`` mode each third is a cluster in all three dimensions;
    in ``independent-dense`` mode third ``j`` is only dense in dimension ``j``.
    """
    if mode not in ("covariant", "independent-dense"):
        raise ValueError(f"unknown fixture mode {mode!r}")
    clusters = []
    for j in range(3):
        dims = frozenset(range(3)) if mode == "covariant" else frozenset([j])
        clusters.append((frozenset(range(100 * j, 100 * (j + 1))), dims))
    return GroundTruth(300, clusters)


def load_synthetic_spec(path) -> SyntheticSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: {exc}") from exc
    return SyntheticSpec.from_dict(doc)


def save_ground_truth(truth: GroundTruth, path) -> None:
    with open(path, "w") as fh:
        json.dump(truth.to_dict(), fh, indent=2)
        fh.write("\n")


def load_ground_truth(path) -> GroundTruth:
    with open(path) as fh:
        return GroundTruth.from_dict(json.load(fh))


def _spread_means(rng: np.random.Generator, k: int, low=0.0, high=100.0) -> list[float]:
    return rng.uniform(low, high, size=k).round(3).tolist()


def disjoint_spec(seed: int = 0, n: int = 900, d: int = 35, std: float = 1.0) -> SyntheticSpec:
    """Two clusters in disjoint subspaces; the last third of points is noise."""
    third = n // 3
    rng = np.random.default_rng(seed)
    dims1 = list(range(0, 10))
    dims2 = list(range(10, 30))
    return SyntheticSpec(
        n=n,
        d=d,
        clusters=[
            ClusterSpec(0, third, dims1, _spread_means(rng, len(dims1)), [std] * len(dims1)),
            ClusterSpec(third, 2 * third, dims2, _spread_means(rng, len(dims2)), [std] * len(dims2)),
        ],
        seed=seed,
    )


def non_disjoint_spec(
    seed: int = 0, n: int = 1000, d: int = 20, std: float = 1.0,
    dims1: Iterable[int] = (5, 6, 7, 8), dims2: Iterable[int] = (4, 5, 6, 7),
) -> SyntheticSpec:
    """Two clusters on disjoint point ranges whose subspaces share dimensions."""
    half = n // 2
    rng = np.random.default_rng(seed)
    dims1, dims2 = list(dims1), list(dims2)
    return SyntheticSpec(
        n=n,
        d=d,
        clusters=[
            ClusterSpec(0, half, dims1, _spread_means(rng, len(dims1)), [std] * len(dims1)),
            ClusterSpec(half, n, dims2, _spread_means(rng, len(dims2)), [std] * len(dims2)),
        ],
        seed=seed,
    )


def bench_spec(n: int, d: int, seed: int = 0, std: float = 1.0) -> SyntheticSpec:
    """Benchmark workload: two clusters on the two halves of the dimensions.

    Each cluster holds a third of the points; the last third is noise.
    """
    if n < 3 or d < 4:
        raise SpecError(f"bench workload needs n >= 3 and d >= 4, got n={n}, d={d}")
    third = n // 3
    rng = np.random.default_rng(seed)
    dims1 = list(range(d // 2))
    dims2 = list(range(d // 2, d))
    return SyntheticSpec(
        n=n,
        d=d,
        clusters=[
            ClusterSpec(0, third, dims1, _spread_means(rng, len(dims1)), [std] * len(dims1)),
            ClusterSpec(third, 2 * third, dims2, _spread_means(rng, len(dims2)), [std] * len(dims2)),
        ],
        seed=seed,
    )
