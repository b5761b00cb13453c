"""
Threshold graphs and reliability analytics
==========================================

The dissimilarity matrix of one transmitter becomes a graph: measurements
are nodes, and an edge appears where delta < tau (the fingerprint was
preserved). Connected components approximate the latent states, and the
full analytics suite quantifies fingerprint reliability.
"""

from itertools import combinations

import numpy as np

from rffkit.discriminator import DissimilarityMatrix
from rffkit.graph import (
    build_graph,
    cluster_count_vs_tau,
    clusters,
    degree_pdf,
    edge_fraction_vs_tau,
    fully_connected_ratio,
    min_subset_for_coverage,
    observability_curve,
    region_decomposition,
    temporal_quantiles,
)

rng = np.random.default_rng(3)

# Build a synthetic 25-measurement matrix with the structure the hardware
# shows: two latent states; same-state pairs sit near 0.5, cross-state pairs
# near 1.0, with a noisy band in between.
chain = [0]
for _ in range(24):
    chain.append(chain[-1] if rng.random() < 0.6 else 1 - chain[-1])
deltas = {}
for x, y in combinations(range(1, 26), 2):
    same = chain[x - 1] == chain[y - 1]
    base = 0.5 if same else 1.0
    deltas[(x, y)] = float(np.clip(base + rng.normal(0, 0.05), 0.0, 1.0))
matrix = DissimilarityMatrix.from_deltas(tx_id=1, n=25, deltas=deltas)

# tau = 0.75 sits halfway between coin flipping (0.5) and perfect
# separation (1.0); the graph's components recover the two latent states.
graph = build_graph(matrix, tau=0.75)
parts = clusters(graph)
print(f"tau=0.75: {len(graph.edges)} edges, {len(parts)} clusters, "
      f"sizes {[len(p) for p in parts]}")

# Sweeping tau shows how the abstraction reacts to the threshold choice:
for tau, count in cluster_count_vs_tau(matrix, [0.55, 0.65, 0.75, 0.85, 0.95, 1.0]):
    print(f"  tau={tau:.2f} -> {count} clusters")

print("edge fraction:", [(t, round(f, 3)) for t, f in
                         edge_fraction_vs_tau(matrix, [0.6, 0.75, 0.9])])

# Region decomposition over the pooled delta values: R1 = fingerprint
# changed (delta = 1), R3 = fingerprint kept (delta = 0.5), R2 = ambiguous.
regions = region_decomposition([matrix], eps_hi=0.05, eps_lo=0.05)
print(f"regions: R1={regions.r1_count} R2={regions.r2_count} R3={regions.r3_count} "
      f"of {regions.total}")

# Degree distribution, temporal behavior, and fully-connected subsets:
pmf = degree_pdf([matrix], [0.75])[0.75]
print("degree pmf mass at 0..5:", np.round(pmf[:6], 3))
row = temporal_quantiles([matrix])[0]
print(f"distance 1: {row.n_pairs} pairs, median delta {row.quantiles[0.5]:.3f}")
for k in (2, 3, 4):
    print(f"fully connected k={k}: {fully_connected_ratio(matrix, 0.75, k):.3f}")

# Observability: how much of the graph a random subset of measurements
# exposes; the smallest subset whose median coverage reaches 90% tells how
# many observations an authenticator needs.
curve = observability_curve(matrix, 0.75)
print("median coverage at k=1..5:",
      [round(p.quantiles[0.5], 3) for p in curve[:5]])
print("subset size for 90% median coverage:", min_subset_for_coverage(curve, 0.9))
