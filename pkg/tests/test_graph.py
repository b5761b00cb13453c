import math
from itertools import combinations

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from rffkit.discriminator import DissimilarityMatrix
from rffkit.graph import (
    adjusted_rand_index,
    build_graph,
    cluster_count_vs_tau,
    clusters,
    degree_pdf,
    edge_fraction_vs_tau,
    fully_connected_ratio,
    min_subset_for_coverage,
    observability_coverages,
    observability_curve,
    partition_labels,
    region_decomposition,
    temporal_quantiles,
    write_edge_list,
    write_pajek,
)


def matrix_from(deltas, n, tx_id=1):
    return DissimilarityMatrix.from_deltas(tx_id, n, deltas)


def constant_matrix(n, delta, tx_id=1):
    return matrix_from({p: delta for p in combinations(range(1, n + 1), 2)}, n, tx_id)


def random_matrix(rng, n, tx_id=1):
    return matrix_from(
        {p: rng.integers(0, 1001) / 1000 for p in combinations(range(1, n + 1), 2)}, n, tx_id
    )


def bfs_components(n, edges):
    """Independent breadth-first-search oracle for connected components."""
    adj = {v: set() for v in range(1, n + 1)}
    for x, y in edges:
        adj[x].add(y)
        adj[y].add(x)
    seen, parts = set(), []
    for start in range(1, n + 1):
        if start in seen:
            continue
        queue, comp = [start], []
        seen.add(start)
        while queue:
            v = queue.pop(0)
            comp.append(v)
            for w in sorted(adj[v]):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        parts.append(sorted(comp))
    return sorted(parts)


def test_build_graph_hand_example():
    matrix = matrix_from({(1, 2): 0.6, (1, 3): 0.9, (2, 3): 0.7}, 3)
    graph = build_graph(matrix, 0.75)
    assert graph.edges == frozenset({(1, 2), (2, 3)})


def test_build_graph_extremes():
    below_one = constant_matrix(5, 0.9)
    assert len(build_graph(below_one, 1.0).edges) == 10  # complete
    at_half = constant_matrix(5, 0.5)
    assert build_graph(at_half, 0.5).edges == frozenset()  # strict rule


def test_build_graph_edge_rules():
    matrix = constant_matrix(4, 0.5)
    assert build_graph(matrix, 0.5, "strict").edges == frozenset()
    assert len(build_graph(matrix, 0.5, "inclusive").edges) == 6
    with pytest.raises(ValueError):
        build_graph(matrix, 0.5, "sloppy")
    with pytest.raises(ValueError):
        build_graph(matrix, 1.5)


def test_build_graph_incomplete_matrix():
    matrix = DissimilarityMatrix.from_deltas(1, 3, {(1, 2): 0.6})
    with pytest.raises(ValueError, match=r"\(1, 3\)"):
        build_graph(matrix, 0.75)


def test_clusters_trivial():
    empty = build_graph(constant_matrix(25, 1.0), 0.75)
    assert len(clusters(empty)) == 25
    complete = build_graph(constant_matrix(25, 0.5), 0.75)
    assert clusters(complete) == [list(range(1, 26))]


def test_clusters_match_bfs_oracle(rng):
    for _ in range(30):
        n = int(rng.integers(2, 13))
        matrix = random_matrix(rng, n)
        graph = build_graph(matrix, 0.75)
        assert clusters(graph) == bfs_components(n, graph.edges)


def test_cluster_count_vs_tau():
    one_state = constant_matrix(10, 0.5)
    counts = dict(cluster_count_vs_tau(one_state, [0.6, 0.75, 0.9, 1.0]))
    assert all(c == 1 for c in counts.values())

    all_distinct = constant_matrix(10, 1.0)
    counts = dict(cluster_count_vs_tau(all_distinct, [0.25, 0.5, 0.75, 1.0]))
    assert all(c == 10 for c in counts.values())

    with pytest.raises(ValueError):
        cluster_count_vs_tau(one_state, [0.9, 0.1])


def test_edge_fraction_vs_tau_step():
    matrix = constant_matrix(25, 0.5)
    fracs = dict(edge_fraction_vs_tau(matrix, [0.25, 0.5, 0.75, 1.0]))
    assert fracs[0.25] == 0.0 and fracs[0.5] == 0.0
    assert fracs[0.75] == 1.0 and fracs[1.0] == 1.0


def test_edge_fraction_brute_force(rng):
    matrix = random_matrix(rng, 9)
    for tau in (0.3, 0.62, 0.9):
        expect = sum(
            1 for p in combinations(range(1, 10), 2) if matrix.delta(*p) < tau
        ) / math.comb(9, 2)
        assert dict(edge_fraction_vs_tau(matrix, [tau]))[tau] == expect


def test_degree_pdf_trivial():
    complete = constant_matrix(25, 0.5)
    pdf = degree_pdf([complete], [0.75])[0.75]
    assert pdf[24] == 1.0 and pdf.sum() == 1.0
    empty = constant_matrix(25, 1.0)
    pdf = degree_pdf([empty], [0.75])[0.75]
    assert pdf[0] == 1.0


def test_degree_pdf_tally_oracle(rng):
    matrices = [random_matrix(rng, 8, tx_id=t) for t in range(1, 4)]
    pdfs = degree_pdf(matrices, [0.5, 0.8])
    for tau in (0.5, 0.8):
        tally = {}
        for m in matrices:
            for node in range(1, 9):
                deg = sum(
                    1 for other in range(1, 9)
                    if other != node and m.delta(node, other) < tau
                )
                tally[deg] = tally.get(deg, 0) + 1
        total = sum(tally.values())
        for deg, count in tally.items():
            assert pdfs[tau][deg] == pytest.approx(count / total)
        assert pdfs[tau].sum() == pytest.approx(1.0)


def test_temporal_quantiles_pair_counts():
    matrices = [constant_matrix(25, 0.8, tx_id=t) for t in range(1, 6)]
    rows = temporal_quantiles(matrices)
    by_distance = {r.distance: r for r in rows}
    assert by_distance[1].n_pairs == 120
    assert by_distance[24].n_pairs == 5
    for row in rows:
        assert all(v == pytest.approx(0.8) for v in row.quantiles.values())


def test_fully_connected_counts_for_25_nodes():
    matrix = constant_matrix(25, 0.5)
    assert math.comb(25, 2) == 300
    assert math.comb(25, 3) == 2300
    assert math.comb(25, 4) == 12650
    for k in (2, 3, 4):
        assert fully_connected_ratio(matrix, 0.75, k) == 1.0


def test_fully_connected_equals_edge_fraction(rng):
    for _ in range(10):
        n = int(rng.integers(3, 11))
        matrix = random_matrix(rng, n)
        tau = float(rng.integers(1, 100)) / 100
        assert fully_connected_ratio(matrix, tau, 2) == dict(
            edge_fraction_vs_tau(matrix, [tau])
        )[tau]


def test_fully_connected_triangle_oracle(rng):
    matrix = random_matrix(rng, 10)
    graph = build_graph(matrix, 0.7)
    edges = graph.edges
    triangles = sum(
        1 for trio in combinations(range(1, 11), 3)
        if all(tuple(sorted(p)) in edges for p in combinations(trio, 2))
    )
    assert fully_connected_ratio(matrix, 0.7, 3) == triangles / math.comb(10, 3)


def test_fully_connected_k_out_of_range():
    matrix = constant_matrix(5, 0.5)
    with pytest.raises(ValueError):
        fully_connected_ratio(matrix, 0.75, 6)
    with pytest.raises(ValueError):
        fully_connected_ratio(matrix, 0.75, 1)


def test_observability_trivial_graphs():
    complete = constant_matrix(6, 0.5)
    for point in observability_curve(complete, 0.75):
        assert all(v == 1.0 for v in point.quantiles.values())
    empty = constant_matrix(6, 1.0)
    for point in observability_curve(empty, 0.75):
        assert all(v == pytest.approx(point.subset_size / 6) for v in point.quantiles.values())


def test_observability_hand_example():
    # components {1,2,3}, {4,5}, {6}; S={1,4} covers 5 of 6 nodes
    deltas = {p: 1.0 for p in combinations(range(1, 7), 2)}
    deltas[(1, 2)] = deltas[(2, 3)] = deltas[(4, 5)] = 0.5
    matrix = matrix_from(deltas, 6)
    coverages, method = observability_coverages(matrix, 0.75, 2)
    assert method == "exact"
    subsets = list(combinations(range(1, 7), 2))
    assert coverages[subsets.index((1, 4))] == pytest.approx(5 / 6)
    assert coverages[subsets.index((1, 2))] == pytest.approx(3 / 6)
    assert coverages[subsets.index((5, 6))] == pytest.approx(3 / 6)


def test_observability_adjacency_mode():
    # path 1-2-3 plus isolated 4: closure(S={1}) = {1, 2}
    deltas = {p: 1.0 for p in combinations(range(1, 5), 2)}
    deltas[(1, 2)] = deltas[(2, 3)] = 0.5
    matrix = matrix_from(deltas, 4)
    coverages, _ = observability_coverages(matrix, 0.75, 1, mode="adjacency")
    assert coverages[0] == pytest.approx(2 / 4)  # S={1}
    assert coverages[1] == pytest.approx(3 / 4)  # S={2} touches 1 and 3
    assert coverages[3] == pytest.approx(1 / 4)  # S={4}
    closure, _ = observability_coverages(matrix, 0.75, 1, mode="component_closure")
    assert closure[0] == pytest.approx(3 / 4)


def test_observability_sampled_deterministic(rng):
    matrix = random_matrix(rng, 10)
    a = observability_curve(matrix, 0.7, enum_budget=5, n_samples=200)
    b = observability_curve(matrix, 0.7, enum_budget=5, n_samples=200)
    assert a == b
    assert all(p.method == "sampled" for p in a if math.comb(10, p.subset_size) > 5)


def test_observability_median_monotone_in_size(rng):
    for _ in range(5):
        matrix = random_matrix(rng, 9)
        points = observability_curve(matrix, 0.75)
        medians = [p.quantiles[0.5] for p in points]
        assert all(b >= a for a, b in zip(medians, medians[1:]))


def test_min_subset_for_coverage():
    deltas = {p: 1.0 for p in combinations(range(1, 5), 2)}
    deltas[(1, 2)] = deltas[(3, 4)] = 0.5  # two 2-node components
    matrix = matrix_from(deltas, 4)
    points = observability_curve(matrix, 0.75)
    assert min_subset_for_coverage(points, 0.9) == 2
    assert min_subset_for_coverage(points, 1.01) is None


def test_region_decomposition_all_distinct():
    matrix = constant_matrix(10, 1.0)
    regions = region_decomposition([matrix])
    assert regions.r1_count == regions.total == 45
    assert regions.r2_count == regions.r3_count == 0


def test_region_decomposition_filter_oracle(rng):
    matrices = [random_matrix(rng, 12, tx_id=t) for t in (1, 2, 3)]
    eps_hi, eps_lo = 0.05, 0.1
    regions = region_decomposition(matrices, eps_hi, eps_lo)
    pooled = np.concatenate([m.values() for m in matrices])
    assert regions.total == pooled.size
    assert regions.r1_count == int((pooled >= 1 - eps_hi).sum())
    assert regions.r3_count == int((pooled <= 0.5 + eps_lo).sum())
    assert regions.r2_count == regions.total - regions.r1_count - regions.r3_count
    assert np.array_equal(regions.sorted_delta, np.sort(pooled)[::-1])


def test_region_decomposition_pooling_order_invariant(rng):
    matrices = [random_matrix(rng, 8, tx_id=t) for t in (1, 2, 3)]
    a = region_decomposition(matrices)
    b = region_decomposition(matrices[::-1])
    assert (a.r1_count, a.r2_count, a.r3_count) == (b.r1_count, b.r2_count, b.r3_count)


def test_region_tolerance_validation():
    matrix = constant_matrix(4, 0.8)
    with pytest.raises(ValueError):
        region_decomposition([matrix], eps_hi=0.25)
    with pytest.raises(ValueError):
        region_decomposition([matrix], eps_lo=-0.01)


def test_adjusted_rand_index_against_sklearn(rng):
    for _ in range(20):
        n = int(rng.integers(2, 40))
        a = rng.integers(0, 4, n)
        b = rng.integers(0, 4, n)
        assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b))
    assert adjusted_rand_index([0, 0, 1, 1], [5, 5, 9, 9]) == 1.0
    assert adjusted_rand_index([0, 0, 0], [0, 0, 0]) == 1.0


def test_partition_labels():
    labels = partition_labels([[1, 3], [2]], 3)
    assert labels[1] == labels[3] != labels[2]


def test_strict_rule_monotonicity(rng):
    taus = np.linspace(0, 1, 21)
    for _ in range(3):
        matrix = random_matrix(rng, 8)
        counts = [c for _, c in cluster_count_vs_tau(matrix, taus)]
        assert all(b <= a for a, b in zip(counts, counts[1:]))
        fracs = [f for _, f in edge_fraction_vs_tau(matrix, taus)]
        assert all(b >= a for a, b in zip(fracs, fracs[1:]))
        degs = np.array([build_graph(matrix, t).degrees()[1:] for t in taus])
        assert np.all(np.diff(degs, axis=0) >= 0)


def test_graph_exports(tmp_path):
    matrix = matrix_from({(1, 2): 0.6, (1, 3): 0.9, (2, 3): 0.7}, 3)
    graph = build_graph(matrix, 0.75)
    write_edge_list(graph, tmp_path / "edges.csv")
    assert (tmp_path / "edges.csv").read_text() == "x,y\n1,2\n2,3\n"
    write_pajek(graph, tmp_path / "g.net")
    content = (tmp_path / "g.net").read_text().splitlines()
    assert content[0] == "*Vertices 3"
    assert "*Edges" in content
    assert content[-1] == "2 3"
