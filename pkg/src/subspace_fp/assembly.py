"""Turn maximal patterns into subspace clusters, and (de)serialize results."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .base_search import SubspaceSet
from .fp_miner import Item, Pattern, TransactionDB

__all__ = ["SubspaceCluster", "ClusteringResult", "AssemblyError", "assemble_clusters"]


class AssemblyError(RuntimeError):
    """A pattern does not occur in the database it was supposedly mined from."""


@dataclass(frozen=True)
class SubspaceCluster:
    id: int
    pattern: tuple[Item, ...]
    support: int
    points: tuple[int, ...]
    dims: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "support": self.support,
            "points": list(self.points),
            "dims": list(self.dims),
            "pattern": [[it.subspace, it.cluster] for it in self.pattern],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SubspaceCluster":
        return cls(
            id=int(doc["id"]),
            pattern=tuple(Item(int(s), int(c)) for s, c in doc.get("pattern", [])),
            support=int(doc.get("support", len(doc["points"]))),
            points=tuple(int(i) for i in doc["points"]),
            dims=tuple(int(j) for j in doc.get("dims", [])),
        )


@dataclass
class ClusteringResult:
    n: int
    clusters: list[SubspaceCluster] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def outliers(self) -> tuple[int, ...]:
        covered = set()
        for c in self.clusters:
            covered.update(c.points)
        return tuple(i for i in range(self.n) if i not in covered)

    @property
    def coverage(self) -> float:
        return 1.0 - len(self.outliers) / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "n": self.n,
            "clusters": [c.to_dict() for c in self.clusters],
            "outliers": list(self.outliers),
        }

    def dumps(self) -> str:
        """Stable text form: fixed key order, one cluster per line."""
        doc = self.to_dict()
        lines = ["{"]
        lines.append(f'  "params": {json.dumps(doc["params"], sort_keys=True)},')
        lines.append(f'  "n": {doc["n"]},')
        if doc["clusters"]:
            lines.append('  "clusters": [')
            body = [f"    {json.dumps(c)}" for c in doc["clusters"]]
            lines.append(",\n".join(body))
            lines.append("  ],")
        else:
            lines.append('  "clusters": [],')
        lines.append(f'  "outliers": {json.dumps(doc["outliers"])}')
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusteringResult":
        return cls(
            n=int(doc["n"]),
            clusters=[SubspaceCluster.from_dict(c) for c in doc["clusters"]],
            params=dict(doc.get("params", {})),
        )

    @classmethod
    def loads(cls, text: str) -> "ClusteringResult":
        return cls.from_dict(json.loads(text))


def assemble_clusters(
    patterns: Sequence[Pattern],
    db: TransactionDB,
    subspaces: SubspaceSet,
    params: dict | None = None,
) -> ClusteringResult:
    """One cluster per pattern: the points containing it, and its dimensions.

    Point sets come from a scan of ``db`` (not from tree counts), so a
    cluster can be larger than the support its pattern had in a pruned tree.
    """
    wanted = {db.code(item) for p in patterns for item in p.items}
    postings: dict[int, set[int]] = {c: set() for c in wanted}
    for i, t in enumerate(db.transactions):
        for c in t:
            if c in postings:
                postings[c].add(i)

    clusters = []
    for cid, pattern in enumerate(patterns):
        codes = sorted((db.code(item) for item in pattern.items), key=lambda c: len(postings[c]))
        points = set(postings[codes[0]]) if codes else set()
        for c in codes[1:]:
            points &= postings[c]
        if not points:
            raise AssemblyError(f"pattern {cid} is contained in no transaction")
        dims = sorted({j for item in pattern.items for j in subspaces[item.subspace]})
        clusters.append(
            SubspaceCluster(cid, tuple(pattern.items), pattern.support, tuple(sorted(points)), tuple(dims))
        )
    clusters.sort(key=lambda c: (-len(c.points), c.id))
    return ClusteringResult(db.n, clusters, dict(params or {}))
