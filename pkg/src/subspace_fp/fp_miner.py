"""Phase 2: the membership table as a transaction database, mined with an FP-tree.

Each point is a transaction whose items are the base clusters covering it.
Items are ranked by descending support; the tree stores ranks, and maps them
back to :class:`Item` through ``FPTree.items``.

Mining returns maximal frequent itemsets only. The search is FP-growth over
conditional trees with the usual maximal-set shortcuts (a single-path tree
yields its whole path; a branch whose head and tail are already covered by a
known maximal set is skipped), so the full set of frequent itemsets is never
materialized.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .base_search import ABSENT, MembershipTable

__all__ = [
    "Item",
    "TransactionDB",
    "FPNode",
    "FPTree",
    "Pattern",
    "to_transactions",
    "min_count",
    "build_fp_tree",
    "knee_prune",
    "mine_maximal",
    "apriori_maximal",
    "OracleSizeError",
]


class Item(NamedTuple):
    subspace: int
    cluster: int

    def __str__(self):
        return f"S{self.subspace}.{self.cluster}"


class OracleSizeError(ValueError):
    """The brute-force oracle was asked to enumerate an input that is too big."""


@dataclass
class TransactionDB:
    """Transactions as tuples of item codes; ``items[code]`` is the item.

    Codes are assigned in ``(subspace, cluster)`` order, so comparing codes is
    the lexicographic item order. Empty transactions are kept so that
    transaction ``i`` stays point ``i``.
    """

    items: list[Item]
    transactions: Sequence[tuple[int, ...]]

    def __post_init__(self):
        self._code = {item: c for c, item in enumerate(self.items)}
        counts = Counter()
        for t in self.transactions:
            counts.update(t)
        self.supports = [counts[c] for c in range(len(self.items))]

    @classmethod
    def from_itemsets(cls, itemsets: Iterable[Iterable]) -> "TransactionDB":
        """Build from arbitrary hashable, orderable items (tests, small inputs)."""
        itemsets = [set(t) for t in itemsets]
        universe = sorted(set().union(*itemsets)) if itemsets else []
        code = {item: c for c, item in enumerate(universe)}
        return cls(universe, [tuple(sorted(code[i] for i in t)) for t in itemsets])

    @property
    def n(self) -> int:
        return len(self.transactions)

    def code(self, item) -> int:
        return self._code[item]

    def support(self, item) -> int:
        return self.supports[self._code[item]]

    def items_of(self, i: int) -> set:
        return {self.items[c] for c in self.transactions[i]}

    def ranking(self, min_count: int, tie_break="lex") -> list[int]:
        """Codes of frequent items, most frequent first.

        ``tie_break`` is ``"lex"`` or an explicit sequence of items; listed
        items win ties in list order, unlisted ones follow in lex order.
        """
        return _rank_codes(self.supports, self.items, min_count, tie_break)

    def containing(self, codes: Iterable[int]) -> list[int]:
        need = set(codes)
        return [i for i, t in enumerate(self.transactions) if need.issubset(t)]


def _rank_codes(supports, items, min_count, tie_break) -> list[int]:
    frequent = [c for c, s in enumerate(supports) if s >= min_count]
    if isinstance(tie_break, str):
        if tie_break != "lex":
            raise ValueError(f"unknown tie-break rule {tie_break!r}")
        return sorted(frequent, key=lambda c: (-supports[c], c))
    position = {item: p for p, item in enumerate(tie_break)}
    last = len(position)
    return sorted(frequent, key=lambda c: (-supports[c], position.get(items[c], last), c))


def to_transactions(z: MembershipTable) -> TransactionDB:
    labels = z.labels
    items: list[Item] = []
    codes = np.full(labels.shape, ABSENT, dtype=np.int64)
    for j in range(labels.shape[1]):
        col = labels[:, j]
        present = np.unique(col[col != ABSENT])
        items.extend(Item(j, int(c)) for c in present)
        if len(present):
            mapped = np.searchsorted(present, col) + (len(items) - len(present))
            codes[:, j] = np.where(col != ABSENT, mapped, ABSENT)
    transactions = [tuple(c for c in row if c >= 0) for row in codes.tolist()]
    return TransactionDB(items, transactions)


def min_count(n: int, min_cluster_size: int | None = None, min_sup: float | None = None) -> int:
    """Absolute support threshold from a cluster size or a fractional ``min_sup``."""
    if (min_cluster_size is None) == (min_sup is None):
        raise ValueError("give exactly one of min_cluster_size and min_sup")
    if min_sup is not None:
        if not 0 < min_sup <= 1:
            raise ValueError(f"min_sup must lie in (0, 1], got {min_sup}")
        # round away float noise such as 0.1 * 900 = 90.00000000000001
        min_cluster_size = math.ceil(round(min_sup * n, 9))
    if not 1 <= min_cluster_size <= n:
        raise ValueError(f"min_cluster_size must lie in [1, {n}], got {min_cluster_size}")
    return int(min_cluster_size)


class FPNode:
    __slots__ = ("item", "count", "parent", "children")

    def __init__(self, item, count, parent):
        self.item = item
        self.count = count
        self.parent = parent
        self.children: dict[int, FPNode] = {}

    def __repr__(self):
        return f"FPNode({self.item}, {self.count})"


class FPTree:
    """Prefix tree over item ranks with a header of per-rank node lists.

    ``items[r]`` is the payload (usually an :class:`Item`) of rank ``r``;
    rank 0 is the most frequent item.
    """

    def __init__(self, items: Sequence, min_count: int):
        self.items = list(items)
        self.min_count = min_count
        self.root = FPNode(None, 0, None)
        self.header: list[list[FPNode]] = [[] for _ in self.items]

    def insert(self, ranks: Sequence[int], count: int = 1) -> None:
        node = self.root
        node.count += count
        for r in ranks:
            child = node.children.get(r)
            if child is None:
                child = FPNode(r, 0, node)
                node.children[r] = child
                self.header[r].append(child)
            child.count += count
            node = child

    def __len__(self) -> int:
        return sum(len(h) for h in self.header)

    def is_empty(self) -> bool:
        return not self.root.children

    def support(self, rank: int) -> int:
        return sum(node.count for node in self.header[rank])

    def supports(self) -> dict:
        """Node-count sum per item, for items that still have nodes."""
        return {self.items[r]: self.support(r) for r in range(len(self.items)) if self.header[r]}

    def walk(self) -> Iterator[tuple[FPNode, int]]:
        """Preorder ``(node, depth)`` pairs, children visited in rank order."""
        stack = [(c, 1) for c in sorted(self.root.children.values(), key=_by_item, reverse=True)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            stack.extend((c, depth + 1) for c in sorted(node.children.values(), key=_by_item, reverse=True))

    def transactions(self) -> Counter:
        """The multiset of (filtered) transactions the tree encodes."""
        out: Counter = Counter()
        for node, _ in self.walk():
            ends = node.count - sum(c.count for c in node.children.values())
            if ends > 0:
                out[tuple(self.items[r] for r in _path_to(node))] += ends
        return out

    def prefix_paths(self, rank: int) -> list[tuple[tuple[int, ...], int]]:
        """Conditional pattern base of ``rank``: prefix paths with counts."""
        base = []
        for node in self.header[rank]:
            path = _path_to(node.parent)
            if path:
                base.append((path, node.count))
        return base

    def single_path(self) -> list[FPNode] | None:
        path = []
        node = self.root
        while node.children:
            if len(node.children) > 1:
                return None
            (node,) = node.children.values()
            path.append(node)
        return path

    def dump(self) -> str:
        lines = [f"{'  ' * (depth - 1)}{self.items[node.item]}:{node.count}" for node, depth in self.walk()]
        return "\n".join(lines) + ("\n" if lines else "")

    def copy(self) -> "FPTree":
        new = FPTree(self.items, self.min_count)
        new.root.count = self.root.count
        stack = [(self.root, new.root)]
        while stack:
            old, twin = stack.pop()
            for r, child in old.children.items():
                node = FPNode(r, child.count, twin)
                twin.children[r] = node
                stack.append((child, node))
        new._rebuild_header()
        return new

    def _rebuild_header(self) -> None:
        self.header = [[] for _ in self.items]
        # breadth-first so node links follow a stable level order
        level = list(self.root.children.values())
        while level:
            nxt = []
            for node in level:
                self.header[node.item].append(node)
                nxt.extend(node.children.values())
            level = nxt


def _by_item(node: FPNode):
    return node.item


def _path_to(node: FPNode) -> tuple[int, ...]:
    path = []
    while node is not None and node.item is not None:
        path.append(node.item)
        node = node.parent
    return tuple(reversed(path))


def build_fp_tree(db: TransactionDB, min_count: int, tie_break="lex") -> FPTree:
    """Two passes over ``db``: count and rank items, then insert transactions.

    Identical filtered transactions are merged before insertion, which does
    not change the tree.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter = Counter()
    for t in db.transactions:
        counts.update(t)
    supports = [counts[c] for c in range(len(db.items))]
    order = _rank_codes(supports, db.items, min_count, tie_break)
    rank = {c: r for r, c in enumerate(order)}

    merged: Counter = Counter()
    for t in db.transactions:
        path = tuple(sorted(rank[c] for c in t if c in rank))
        if path:
            merged[path] += 1

    tree = FPTree([db.items[c] for c in order], min_count)
    for path in sorted(merged):
        tree.insert(path, merged[path])
    tree._rebuild_header()
    return tree


def knee_prune(t: FPTree, min_ratio: float = 2.0) -> FPTree:
    """Cut every root-to-leaf path below its sharpest count drop.

    Along a path the drop across an edge is ``count(parent) / count(child)``;
    the root counts all inserted transactions. Only edges into nodes whose
    count is below ``t.min_count`` are knee candidates: such a node can not
    carry an admissible cluster by itself. The knee is the candidate with the
    largest drop (ties go to the deepest edge) and, if that drop reaches
    ``min_ratio``, the child's whole subtree is removed. Items left without
    nodes keep their rank but disappear from the header.
    """
    out = t.copy()
    if math.isinf(min_ratio) or out.is_empty():
        return out
    doomed: dict[int, FPNode] = {}
    stack = [(c, out.root, 0.0, None) for c in out.root.children.values()]
    while stack:
        node, parent, best, knee = stack.pop()
        ratio = parent.count / node.count
        if node.count < out.min_count and ratio >= best:
            best, knee = ratio, node
        if node.children:
            stack.extend((c, node, best, knee) for c in node.children.values())
        elif knee is not None and best >= min_ratio:
            doomed[id(knee)] = knee
    for node in doomed.values():
        node.parent.children.pop(node.item, None)
    out._rebuild_header()
    return out


@dataclass(frozen=True)
class Pattern:
    items: tuple
    support: int

    @property
    def itemset(self) -> frozenset:
        return frozenset(self.items)

    def __len__(self) -> int:
        return len(self.items)


class _MaximalSets:
    def __init__(self):
        self.sets: list[tuple[frozenset, int]] = []

    def covers(self, candidate: frozenset) -> bool:
        return any(candidate <= s for s, _ in self.sets)

    def add(self, candidate: frozenset, support: int) -> None:
        if self.covers(candidate):
            return
        self.sets = [(s, c) for s, c in self.sets if not s <= candidate]
        self.sets.append((candidate, support))


def _conditional_tree(base, min_count: int) -> FPTree | None:
    counts: Counter = Counter()
    for path, count in base:
        for r in path:
            counts[r] += count
    keep = {r for r, c in counts.items() if c >= min_count}
    if not keep:
        return None
    # conditional trees keep the global rank order; items are the ranks themselves
    tree = FPTree(range(max(keep) + 1), min_count)
    for path, count in base:
        filtered = [r for r in path if r in keep]
        if filtered:
            tree.insert(filtered, count)
    return tree


def _fpmax(tree: FPTree, head: frozenset, head_support: int, found: _MaximalSets) -> None:
    lo = tree.min_count
    path = tree.single_path()
    if path is not None:
        kept = [node for node in path if node.count >= lo]
        if kept:
            found.add(head | {node.item for node in kept}, kept[-1].count)
        elif head:
            found.add(head, head_support)
        return
    for r in reversed(range(len(tree.header))):
        if not tree.header[r]:
            continue
        support = tree.support(r)
        if support < lo:
            continue
        new_head = head | {r}
        base = tree.prefix_paths(r)
        tail: Counter = Counter()
        for p, count in base:
            for q in p:
                tail[q] += count
        tail_items = {q for q, c in tail.items() if c >= lo}
        if found.covers(new_head | tail_items):
            continue
        cond = _conditional_tree(base, lo) if tail_items else None
        if cond is None:
            found.add(new_head, support)
        else:
            _fpmax(cond, new_head, support, found)


def _sorted_patterns(sets, payload) -> list[Pattern]:
    patterns = [
        (-support, tuple(sorted(ranks)), support) for ranks, support in sets
    ]
    patterns.sort()
    return [Pattern(tuple(payload[r] for r in ranks), support) for _, ranks, support in patterns]


def mine_maximal(t: FPTree) -> list[Pattern]:
    """Maximal itemsets with support >= ``t.min_count``, counted on ``t``.

    Sorted by descending support, then by the items' rank sequence.
    """
    found = _MaximalSets()
    if not t.is_empty():
        _fpmax(t, frozenset(), 0, found)
    return _sorted_patterns(found.sets, t.items)


APRIORI_MAX_ITEMS = 20
APRIORI_MAX_TRANSACTIONS = 64


def apriori_maximal(db: TransactionDB, min_count: int, tie_break="lex") -> list[Pattern]:
    """Level-wise brute force over explicit subsets; a test oracle only."""
    used = {c for t in db.transactions for c in t}
    if len(used) > APRIORI_MAX_ITEMS or db.n > APRIORI_MAX_TRANSACTIONS:
        raise OracleSizeError(
            f"apriori oracle limited to {APRIORI_MAX_ITEMS} items and "
            f"{APRIORI_MAX_TRANSACTIONS} transactions"
        )
    rows = [frozenset(t) for t in db.transactions]

    def support(s):
        return sum(1 for row in rows if s <= row)

    # level-wise with the classic prefix join: two sorted k-sets sharing
    # their first k-1 items make one (k+1)-candidate
    level = []
    for c in sorted(used):
        k = support(frozenset([c]))
        if k >= min_count:
            level.append(((c,), k))
    frequent = [(frozenset(s), k) for s, k in level]
    while level:
        seen = {s for s, _ in level}
        nxt = []
        for i, (a, _) in enumerate(level):
            for b, _ in level[i + 1:]:
                if a[:-1] != b[:-1]:
                    break
                u = a + b[-1:]
                if all(u[:j] + u[j + 1:] in seen for j in range(len(u) - 2)):
                    k = support(frozenset(u))
                    if k >= min_count:
                        nxt.append((u, k))
        level = nxt
        frequent.extend((frozenset(s), k) for s, k in level)

    # frequent sets are downward closed, so a set is maximal exactly when no
    # one-item extension of it is frequent
    known = {s for s, _ in frequent}
    maximal = [
        (s, k) for s, k in frequent
        if not any(s | {x} in known for x in used - s)
    ]
    order = db.ranking(min_count, tie_break)
    rank = {c: r for r, c in enumerate(order)}
    payload = [db.items[c] for c in order]
    return _sorted_patterns([(frozenset(rank[c] for c in s), k) for s, k in maximal], payload)
