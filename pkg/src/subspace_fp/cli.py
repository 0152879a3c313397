"""Command-line entry point: ``generate``, ``cluster``, ``eval`` and ``bench``.

Every option can also be given through an environment variable named
``FPSC_`` plus the option's long name in upper case with dashes turned into
underscores (``FPSC_MIN_SUP=0.2``, ``FPSC_THREADS=4``). Flags on the command
line win over the environment.

Exit status: 0 on success, 1 when the pipeline fails, 2 for usage errors
(bad flags, unreadable paths).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .assembly import AssemblyError, ClusteringResult
from .base_search import MembershipTable
from .dataset import (
    DataError,
    SpecError,
    bench_spec,
    covariant_truth,
    disjoint_spec,
    generate_covariant_fixture,
    generate_synthetic,
    load_ground_truth,
    load_matrix,
    load_synthetic_spec,
    non_disjoint_spec,
    save_ground_truth,
    save_matrix,
)
from .estimator import FPSubspaceClustering, sweep_k
from .fp_miner import Item
from .metrics import flatten_for_nmi, nmi, pair_scores

ENV_PREFIX = "FPSC_"

PRESETS = ("disjoint", "non-disjoint", "covariant", "independent-dense")


class UsageError(Exception):
    """Bad invocation; reported with exit status 2."""


# ---------------------------------------------------------------- parsing


def _k_list(text: str) -> list[int]:
    try:
        ks = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ks:
        raise argparse.ArgumentTypeError("k list is empty")
    if any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError(f"k must be positive, got {text!r}")
    return ks


def _sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for part in text.split(","):
        part = part.strip().lower().replace("_", "")
        if not part:
            continue
        try:
            n, d = part.split("x")
            out.append((int(n), int(d)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"size {part!r} is not NxD") from None
    if not out:
        raise argparse.ArgumentTypeError("size list is empty")
    return out


def _tie_break(text: str):
    if text == "lex":
        return "lex"
    items = []
    for token in text.split(","):
        token = token.strip()
        try:
            sub, _, cl = token.removeprefix("S").partition(".")
            items.append(Item(int(sub), int(cl)))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"tie-break must be 'lex' or items like S5.1,S0.1; got {token!r}"
            ) from None
    return items


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _env_defaults(parser: argparse.ArgumentParser) -> None:
    """Seed option defaults from ``FPSC_*`` variables.

    argparse runs ``type`` over string defaults, so the environment value is
    validated like a command-line one.
    """
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "version"):
            continue
        long = max(action.option_strings, key=len).lstrip("-")
        raw = os.environ.get(ENV_PREFIX + long.upper().replace("-", "_"))
        if raw is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            action.default = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            action.default = raw


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--k", type=_k_list, default=[10],
                   help="base clusters per subspace; a comma list sweeps k (default 10)")
    sup = g.add_mutually_exclusive_group()
    sup.add_argument("--min-sup", type=_positive_float, default=None,
                     help="minimum cluster size as a fraction of n (default 0.1)")
    sup.add_argument("--min-cluster-size", type=int, default=None,
                     help="minimum cluster size in points")
    g.add_argument("--policy", choices=("auto", "all", "sample"), default="auto",
                   help="subspace enumeration: all pairs, sampled, or auto (all below d=100)")
    g.add_argument("--subspaces", type=int, default=None,
                   help="number of sampled subspaces (default: fewest meeting --coverage)")
    g.add_argument("--coverage", type=int, default=5,
                   help="minimum sampled subspaces per dimension (default 5)")
    g.add_argument("--p", type=int, default=2, help="dimensionality of base subspaces (default 2)")
    g.add_argument("--min-ratio", type=float, default=2.0,
                   help="smallest count drop treated as a knee when pruning (default 2.0)")
    g.add_argument("--tie-break", type=_tie_break, default="lex",
                   help="'lex' or an explicit item order such as S5.1,S0.1 (default lex)")
    g.add_argument("--trim", type=float, default=None,
                   help="drop base-cluster members beyond TRIM x the median distance (default off)")
    g.add_argument("--n-init", type=int, default=1, help="k-means restarts per subspace (default 1)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--normalize", action="store_true", help="z-score columns before clustering")
    g.add_argument("--threads", type=int, default=1, help="worker threads for phase 1 (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subspace-fp",
        description="Bottom-up subspace clustering through FP-tree pattern mining.",
        epilog=f"Options may also be set as {ENV_PREFIX}<OPTION> environment variables.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset and its ground truth")
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", type=Path, help="synthetic spec (JSON, see docs/synthetic_spec.md)")
    src.add_argument("--preset", choices=PRESETS, help="built-in workload")
    gen.add_argument("--n", type=int, default=None, help="points (presets disjoint/non-disjoint)")
    gen.add_argument("--d", type=int, default=None, help="dimensions (presets disjoint/non-disjoint)")
    gen.add_argument("--seed", type=int, default=0, help="random seed for presets (default 0)")
    gen.add_argument("--out", type=Path, required=True, help="data CSV to write")
    gen.add_argument("--truth", type=Path, default=None,
                     help="ground truth JSON (default: OUT with suffix .truth.json)")

    cl = sub.add_parser("cluster", help="cluster a data matrix")
    cl.add_argument("input", nargs="?", type=Path, help="data CSV (one point per row)")
    cl.add_argument("--membership", type=Path, default=None,
                    help="skip phase 1 and read the membership table from this CSV")
    cl.add_argument("--header", action="store_true", help="the data CSV starts with a header row")
    cl.add_argument("--out", type=Path, default=None, help="result file (default: stdout)")
    cl.add_argument("--summary", type=Path, default=None,
                    help="per-k sweep summary (default: OUT with suffix .sweep.json)")
    _add_pipeline_options(cl)

    ev = sub.add_parser("eval", help="score a clustering result against ground truth")
    ev.add_argument("result", type=Path)
    ev.add_argument("truth", type=Path)
    ev.add_argument("--average", choices=("arithmetic", "geometric"), default="arithmetic",
                    help="NMI normalizer (default arithmetic)")

    be = sub.add_parser("bench", help="time both phases on synthetic workloads")
    be.add_argument("--sizes", type=_sizes, default=[(10_000, 10), (50_000, 10), (100_000, 10)],
                    help="comma list of NxD sizes (default 10000x10,50000x10,100000x10)")
    be.add_argument("--out", type=Path, default=None, help="report JSON (default: stdout table only)")
    _add_pipeline_options(be)

    for p in (gen, cl, ev, be):
        _env_defaults(p)
    return parser


# ---------------------------------------------------------------- commands


def _require_file(path: Path, what: str) -> None:
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")


def _estimator(args, k: int) -> FPSubspaceClustering:
    min_sup = args.min_sup
    if min_sup is None and args.min_cluster_size is None:
        min_sup = 0.1
    return FPSubspaceClustering(
        k=k,
        min_sup=min_sup,
        min_cluster_size=args.min_cluster_size,
        p=args.p,
        policy=args.policy,
        n_subspaces=args.subspaces,
        coverage=args.coverage,
        n_init=args.n_init,
        trim=args.trim,
        min_ratio=args.min_ratio,
        tie_break=args.tie_break,
        normalize=args.normalize,
        random_state=args.seed,
        n_jobs=args.threads,
    )


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def cmd_generate(args) -> int:
    if args.spec is not None:
        _require_file(args.spec, "spec file")
        X, truth = generate_synthetic(load_synthetic_spec(args.spec))
    elif args.preset in ("covariant", "independent-dense"):
        X, truth = generate_covariant_fixture(args.preset, seed=args.seed), covariant_truth(args.preset)
    else:
        make = disjoint_spec if args.preset == "disjoint" else non_disjoint_spec
        sizes = {key: val for key, val in (("n", args.n), ("d", args.d)) if val is not None}
        X, truth = generate_synthetic(make(seed=args.seed, **sizes))
    save_matrix(X, args.out, header=False)
    truth_path = args.truth or args.out.with_suffix(".truth.json")
    save_ground_truth(truth, truth_path)
    print(f"wrote {X.n}x{X.d} matrix to {args.out} and ground truth to {truth_path}")
    return 0


def cmd_cluster(args) -> int:
    if (args.input is None) == (args.membership is None):
        raise UsageError("give either a data file or --membership, not both or neither")
    if args.membership is not None:
        _require_file(args.membership, "membership table")
        if len(args.k) > 1:
            raise UsageError("--membership fixes the base clusters; a k sweep makes no sense")
        with open(args.membership) as fh:
            z = MembershipTable.from_csv(fh)
        est = _estimator(args, args.k[0]).fit_membership(z)
        entries = None
    else:
        _require_file(args.input, "input file")
        X = load_matrix(args.input, has_header=args.header)
        if len(args.k) == 1:
            est = _estimator(args, args.k[0]).fit(X.values)
            entries = None
        else:
            est, entries = sweep_k(_estimator(args, args.k[0]), X.values, args.k)

    _write(est.result_.dumps(), args.out)
    if entries is not None:
        summary = {
            "selected_k": est.k,
            "criterion": "coverage",
            "runs": [
                {"k": e.k, "clusters": e.n_clusters, "coverage": round(e.coverage, 6)}
                for e in entries
            ],
        }
        path = args.summary
        if path is None and args.out is not None:
            path = args.out.with_suffix(".sweep.json")
        if path is not None:
            path.write_text(json.dumps(summary, indent=2) + "\n")
        else:
            for run in summary["runs"]:
                print(f"# k={run['k']} clusters={run['clusters']} coverage={run['coverage']:.4f}",
                      file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    _require_file(args.result, "result file")
    _require_file(args.truth, "truth file")
    result = ClusteringResult.loads(args.result.read_text())
    truth = load_ground_truth(args.truth)
    if result.n != truth.n:
        raise ValueError(f"result covers {result.n} points but truth has {truth.n}")
    score = nmi(flatten_for_nmi(result), truth.labels(outliers="singleton"), average=args.average)
    pairs = pair_scores(result, truth)
    print(f"nmi        {score:.4f}")
    print(f"precision  {pairs.precision:.4f}")
    print(f"recall     {pairs.recall:.4f}")
    print(f"f1         {pairs.f1:.4f}")
    print(f"clusters   {len(result.clusters)}")
    print(f"outliers   {len(result.outliers)}")
    return 0


@dataclass
class BenchRow:
    n: int
    d: int
    phase1: float = math.nan
    phase2: float = math.nan
    total: float = math.nan
    transactions: int = 0
    items: int = 0
    tree_nodes: int = 0
    clusters: int = 0
    status: str = "ok"


@dataclass
class BenchReport:
    rows: list[BenchRow]
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"params": self.params, "rows": [asdict(r) for r in self.rows]}

    def ratio(self, small: int, large: int) -> float:
        """``total(large) / total(small)`` over rows with those ``n``."""
        times = {r.n: r.total for r in self.rows if r.status == "ok"}
        return times[large] / times[small]

    def table(self) -> str:
        lines = [f"{'n':>8} {'d':>4} {'phase1':>9} {'phase2':>9} {'total':>9} {'nodes':>9} {'clusters':>8}  status"]
        for r in self.rows:
            lines.append(
                f"{r.n:>8} {r.d:>4} {r.phase1:>9.3f} {r.phase2:>9.3f} {r.total:>9.3f} "
                f"{r.tree_nodes:>9} {r.clusters:>8}  {r.status}"
            )
        return "\n".join(lines) + "\n"


def run_bench(sizes, make_estimator, seed: int = 0) -> BenchReport:
    """Time phase 1 and phase 2 on one synthetic workload per ``(n, d)``.

    A row whose run raises (memory exhaustion included) is kept with its
    status set to the error, and the remaining sizes still run.
    """
    rows = []
    params = {}
    for n, d in sorted(set(sizes)):
        row = BenchRow(n, d)
        try:
            X, _ = generate_synthetic(bench_spec(n, d, seed=seed))
            est = make_estimator()
            params = est.get_params()
            t0 = time.perf_counter()
            est.fit(X.values)
            row.total = time.perf_counter() - t0
            row.phase1 = est.timings_["phase1"]
            row.phase2 = est.timings_["phase2"]
            row.transactions = est.transactions_.n
            row.items = len(est.transactions_.items)
            row.tree_nodes = len(est.tree_)
            row.clusters = len(est.clusters_)
        except (MemoryError, ValueError, SpecError, AssemblyError) as exc:
            row.status = f"failed: {type(exc).__name__}: {exc}"
        rows.append(row)
    params = {key: val for key, val in params.items() if key != "tie_break"}
    return BenchReport(rows, params)


def cmd_bench(args) -> int:
    if len(args.k) > 1:
        raise UsageError("bench takes a single --k")
    report = run_bench(args.sizes, lambda: _estimator(args, args.k[0]), seed=args.seed)
    sys.stdout.write(report.table())
    if args.out is not None:
        args.out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return 0 if all(r.status == "ok" for r in report.rows) else 1


COMMANDS = {
    "generate": cmd_generate,
    "cluster": cmd_cluster,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, SpecError, AssemblyError, ValueError, OSError) as exc:
        print(f"{parser.prog} {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
