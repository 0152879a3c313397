"""Bottom-up subspace clustering with FP-tree aggregation of base clusters."""
from .assembly import ClusteringResult, SubspaceCluster, assemble_clusters
from .base_search import (
    ABSENT,
    MembershipTable,
    SubspaceSet,
    build_membership,
    cluster_base,
    enumerate_subspaces,
    trim_far_members,
)
from .dataset import (
    DataMatrix,
    GroundTruth,
    SyntheticSpec,
    ClusterSpec,
    bench_spec,
    covariant_truth,
    disjoint_spec,
    non_disjoint_spec,
    generate_covariant_fixture,
    generate_synthetic,
    load_matrix,
    zscore_normalize,
)
from .estimator import FPSubspaceClustering, cluster_membership, sweep_k
from .fp_miner import (
    FPTree,
    Item,
    Pattern,
    TransactionDB,
    apriori_maximal,
    build_fp_tree,
    knee_prune,
    min_count,
    mine_maximal,
    to_transactions,
)
from .metrics import coherence_profile, flatten_for_nmi, nmi, pair_scores

__version__ = "0.1.0"
