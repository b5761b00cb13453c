"""Threshold graphs over dissimilarity matrices and reliability analytics.

A measurement pair gets an edge when its dissimilarity index falls below the
threshold tau (strict rule, the default) or at-or-below it (inclusive rule).
Connected components of the resulting graph approximate the fingerprint
states a transmitter moves through; everything else here — regions, cluster
counts, edge fractions, degree distributions, temporal quantiles,
fully-connected subset ratios, observability — is a pure function of the
matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

EDGE_RULES = ("strict", "inclusive")

DEFAULT_QUANTILES = (0.05, 0.5, 0.95)
ENUM_BUDGET = 100_000  # exact subset enumeration up to this many subsets
SAMPLE_COUNT = 10_000  # uniform subset samples beyond the budget


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


@dataclass(frozen=True)
class ReliabilityGraph:
    """Threshold graph: nodes are measurement indices 1..n."""

    tx_id: int
    n: int
    tau: float
    edge_rule: str
    edges: frozenset  # of (x, y) with x < y

    def adjacency(self):
        """Boolean adjacency matrix indexed by measurement id (row/col 0 unused)."""
        adj = np.zeros((self.n + 1, self.n + 1), dtype=bool)
        for x, y in self.edges:
            adj[x, y] = adj[y, x] = True
        return adj

    def degrees(self):
        """Degree per node, indexed by measurement id (entry 0 unused)."""
        deg = np.zeros(self.n + 1, dtype=np.int64)
        for x, y in self.edges:
            deg[x] += 1
            deg[y] += 1
        return deg


def _edge_passes(delta, tau, edge_rule):
    if edge_rule == "strict":
        return delta < tau
    if edge_rule == "inclusive":
        return delta <= tau
    raise ValueError(f"edge_rule must be one of {EDGE_RULES}, got {edge_rule!r}")


def build_graph(matrix, tau, edge_rule="strict"):
    """Abstract a complete dissimilarity matrix into a threshold graph."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau {tau} must lie in [0, 1]")
    if edge_rule not in EDGE_RULES:
        raise ValueError(f"edge_rule must be one of {EDGE_RULES}, got {edge_rule!r}")
    missing = matrix.missing_pairs()
    if missing:
        raise ValueError(
            f"matrix for transmitter {matrix.tx_id} is incomplete; "
            f"missing pairs: {missing}"
        )
    edges = frozenset(
        pair for pair in matrix.all_pairs() if _edge_passes(matrix.delta(*pair), tau, edge_rule)
    )
    return ReliabilityGraph(tx_id=matrix.tx_id, n=matrix.n, tau=tau, edge_rule=edge_rule, edges=edges)


def clusters(graph):
    """Connected components as sorted node lists (singletons included)."""
    uf = UnionFind(graph.n)
    for x, y in graph.edges:
        uf.union(x - 1, y - 1)
    by_root = {}
    for node in range(1, graph.n + 1):
        by_root.setdefault(uf.find(node - 1), []).append(node)
    return sorted(by_root.values())


def partition_labels(partition, n):
    """Node -> cluster-id array (index 0 unused) from a clusters() partition."""
    labels = np.full(n + 1, -1, dtype=np.int64)
    for cid, nodes in enumerate(partition):
        for node in nodes:
            labels[node] = cid
    return labels


def cluster_count_vs_tau(matrix, tau_grid, edge_rule="strict"):
    """(tau, number of connected components) along an ascending tau grid."""
    tau_grid = list(tau_grid)
    if sorted(tau_grid) != tau_grid:
        raise ValueError("tau grid must be sorted ascending")
    return [(tau, len(clusters(build_graph(matrix, tau, edge_rule)))) for tau in tau_grid]


def edge_fraction_vs_tau(matrix, tau_grid, edge_rule="strict"):
    """(tau, |E| / C(n, 2)) along an ascending tau grid."""
    tau_grid = list(tau_grid)
    if sorted(tau_grid) != tau_grid:
        raise ValueError("tau grid must be sorted ascending")
    possible = math.comb(matrix.n, 2)
    return [
        (tau, len(build_graph(matrix, tau, edge_rule).edges) / possible) for tau in tau_grid
    ]


def degree_pdf(matrices, tau_set, edge_rule="strict"):
    """Per-tau empirical degree distribution pooled across transmitters.

    Returns {tau: pmf} with pmf[d] = fraction of nodes of degree d; support
    runs 0..max(n)-1 and each pmf sums to 1.
    """
    matrices = list(matrices)
    max_n = max(m.n for m in matrices)
    out = {}
    for tau in tau_set:
        degs = np.concatenate(
            [build_graph(m, tau, edge_rule).degrees()[1:] for m in matrices]
        )
        out[tau] = np.bincount(degs, minlength=max_n) / degs.size
    return out


@dataclass(frozen=True)
class TemporalRow:
    distance: int
    n_pairs: int
    quantiles: dict  # quantile -> delta value


def temporal_quantiles(matrices, quantiles=DEFAULT_QUANTILES):
    """Dissimilarity quantiles vs temporal distance between measurements.

    Distance d pools delta(x, x+d) over all transmitters; with a uniform
    n-measurement layout the pair count at distance d is (n-d) * n_tx.
    Quantiles use linear interpolation.
    """
    matrices = list(matrices)
    max_d = max(m.n for m in matrices) - 1
    rows = []
    for d in range(1, max_d + 1):
        pooled = [
            m.delta(x, x + d) for m in matrices for x in range(1, m.n - d + 1)
        ]
        values = np.quantile(np.array(pooled), quantiles)
        rows.append(
            TemporalRow(distance=d, n_pairs=len(pooled), quantiles=dict(zip(quantiles, values)))
        )
    return rows


def fully_connected_ratio(matrix, tau, k, edge_rule="strict"):
    """Fraction of the C(n, k) node subsets that induce a complete subgraph.

    Exact enumeration; k=2 coincides with the edge fraction by definition.
    """
    n = matrix.n
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= {n}, got {k}")
    graph = build_graph(matrix, tau, edge_rule)
    adj = graph.adjacency()
    subsets = np.array(list(combinations(range(1, n + 1), k)))
    ok = np.ones(len(subsets), dtype=bool)
    for i, j in combinations(range(k), 2):
        ok &= adj[subsets[:, i], subsets[:, j]]
    return int(ok.sum()) / math.comb(n, k)


# ---------------------------------------------------------------------------
# Observability: how much of the graph a random node subset exposes

OBSERVABILITY_MODES = ("component_closure", "adjacency")


@dataclass(frozen=True)
class ObservabilityPoint:
    subset_size: int
    n_subsets: int
    method: str  # "exact" | "sampled"
    quantiles: dict  # quantile -> covered fraction


def _sample_permutations(n, n_samples, seed):
    # Row-wise argsort of uniforms = uniform random permutations of node ids,
    # drawn once per (n, seed) so subsets do not depend on tau or k.
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
    return np.argsort(rng.random((n_samples, n)), axis=1) + 1


def _subsets_for_size(n, k, enum_budget, perms):
    if math.comb(n, k) <= enum_budget:
        return np.array(list(combinations(range(1, n + 1), k)), dtype=np.int64), "exact"
    # Size-k prefixes of shared permutations: the same chains serve every k,
    # so sampled medians are monotone in k by construction.
    return perms[:, :k], "sampled"


def _closure_fractions(graph, subsets, mode):
    n = graph.n
    if mode == "component_closure":
        part = clusters(graph)
        comp_id = partition_labels(part, n)
        comp_size = np.array([len(c) for c in part], dtype=np.int64)
        ids = np.sort(comp_id[subsets], axis=1)
        first = np.ones_like(ids, dtype=bool)
        first[:, 1:] = ids[:, 1:] != ids[:, :-1]
        covered = (comp_size[ids] * first).sum(axis=1)
        return covered / n
    if mode == "adjacency":
        reach = graph.adjacency()
        np.fill_diagonal(reach, True)  # S itself is always covered
        covered = np.empty(len(subsets), dtype=np.int64)
        chunk = 20_000
        for lo in range(0, len(subsets), chunk):
            block = subsets[lo : lo + chunk]
            covered[lo : lo + len(block)] = reach[block].any(axis=1)[:, 1:].sum(axis=1)
        return covered / n
    raise ValueError(f"mode must be one of {OBSERVABILITY_MODES}, got {mode!r}")


def observability_coverages(
    matrix,
    tau,
    k,
    mode="component_closure",
    edge_rule="strict",
    enum_budget=ENUM_BUDGET,
    n_samples=SAMPLE_COUNT,
    sample_seed=0,
    _graph=None,
    _perms=None,
):
    """Covered fraction for every evaluated size-k subset of one graph.

    Coverage of S is |closure(S)| / n: in component_closure mode the closure
    is the union of connected components touching S, in adjacency mode it is
    S plus its direct neighbors. Subsets are enumerated exactly while
    C(n, k) stays within `enum_budget`, else sampled uniformly with a fixed
    seed. Returns (coverages, method).
    """
    graph = _graph if _graph is not None else build_graph(matrix, tau, edge_rule)
    if not 1 <= k <= graph.n:
        raise ValueError(f"subset size {k} out of range 1..{graph.n}")
    if math.comb(graph.n, k) > enum_budget and _perms is None:
        _perms = _sample_permutations(graph.n, n_samples, sample_seed)
    subsets, method = _subsets_for_size(graph.n, k, enum_budget, _perms)
    return _closure_fractions(graph, subsets, mode), method


def observability_curve(
    matrix,
    tau,
    mode="component_closure",
    sizes=None,
    quantiles=DEFAULT_QUANTILES,
    edge_rule="strict",
    enum_budget=ENUM_BUDGET,
    n_samples=SAMPLE_COUNT,
    sample_seed=0,
):
    """Coverage quantiles per subset size (default sizes 1..n)."""
    graph = build_graph(matrix, tau, edge_rule)
    if sizes is None:
        sizes = range(1, graph.n + 1)
    perms = None
    if any(math.comb(graph.n, k) > enum_budget for k in sizes):
        perms = _sample_permutations(graph.n, n_samples, sample_seed)

    points = []
    for k in sizes:
        coverages, method = observability_coverages(
            matrix, tau, k, mode, edge_rule, enum_budget, n_samples, sample_seed,
            _graph=graph, _perms=perms,
        )
        values = np.quantile(coverages, quantiles)
        points.append(
            ObservabilityPoint(
                subset_size=int(k),
                n_subsets=len(coverages),
                method=method,
                quantiles=dict(zip(quantiles, values)),
            )
        )
    return points


def min_subset_for_coverage(points, p=0.9):
    """Smallest subset size whose median coverage reaches p, else None."""
    for point in sorted(points, key=lambda pt: pt.subset_size):
        if point.quantiles[0.5] >= p:
            return point.subset_size
    return None


# ---------------------------------------------------------------------------
# Region decomposition of pooled dissimilarity values


@dataclass(frozen=True)
class RegionDecomposition:
    """Counts of the distinct / ambiguous / identical fingerprint regimes.

    R1 holds pairs with delta >= 1 - eps_hi (fingerprint changed), R3 pairs
    with delta <= 0.5 + eps_lo (same fingerprint), R2 the remainder where
    detection is ambiguous. sorted_delta descends, tracing the hit-rate curve.
    """

    r1_count: int
    r2_count: int
    r3_count: int
    eps_hi: float
    eps_lo: float
    sorted_delta: np.ndarray

    @property
    def total(self):
        return self.r1_count + self.r2_count + self.r3_count


def region_decomposition(matrices, eps_hi=0.0, eps_lo=0.0):
    """Partition all pooled delta values into the R1/R2/R3 regions.

    Default tolerances are 0 (exact 1.0 and 0.5 endpoints), which the
    1/len(test) granularity of the reference discriminator makes meaningful;
    widen them for noisy plug-in discriminators.
    """
    if not (0.0 <= eps_hi < 0.25 and 0.0 <= eps_lo < 0.25):
        raise ValueError("region tolerances must lie in [0, 0.25)")
    pooled = np.concatenate([m.values() for m in matrices])
    r1 = int(np.sum(pooled >= 1.0 - eps_hi))
    r3 = int(np.sum(pooled <= 0.5 + eps_lo))
    return RegionDecomposition(
        r1_count=r1,
        r2_count=int(pooled.size) - r1 - r3,
        r3_count=r3,
        eps_hi=eps_hi,
        eps_lo=eps_lo,
        sorted_delta=np.sort(pooled)[::-1],
    )


def adjusted_rand_index(labels_a, labels_b):
    """Adjusted Rand index between two labelings of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be 1-d and of equal length")
    n = a.size
    if n < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) // 2

    sum_ij = int(comb2(table).sum())
    sum_a = int(comb2(table.sum(axis=1)).sum())
    sum_b = int(comb2(table.sum(axis=0)).sum())
    expected = sum_a * sum_b / comb2(n)
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)


# ---------------------------------------------------------------------------
# Graph export for external visualization


def write_edge_list(graph, path, comment=None):
    """CSV edge list (one x,y row per edge, sorted)."""
    lines = [] if comment is None else [f"# {comment}"]
    lines += ["x,y"] + [f"{x},{y}" for x, y in sorted(graph.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_pajek(graph, path, comment=None):
    """Pajek .net text format: one node per line, one edge per line."""
    lines = [] if comment is None else [f"% {comment}"]
    lines += [f"*Vertices {graph.n}"]
    lines += [f'{v} "{v}"' for v in range(1, graph.n + 1)]
    lines.append("*Edges")
    lines += [f"{x} {y}" for x, y in sorted(graph.edges)]
    Path(path).write_text("\n".join(lines) + "\n")
