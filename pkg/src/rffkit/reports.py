"""Analytics report bundle: 8 CSV files plus one JSON summary.

Every emitted file carries the run seed and toolkit version (a leading
comment line in the CSVs, fields in the JSON); the summary embeds the full
run spec so every number is traceable to its configuration.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .graph import (
    DEFAULT_QUANTILES,
    adjusted_rand_index,
    build_graph,
    cluster_count_vs_tau,
    clusters,
    degree_pdf,
    edge_fraction_vs_tau,
    fully_connected_ratio,
    min_subset_for_coverage,
    observability_coverages,
    ObservabilityPoint,
    partition_labels,
    region_decomposition,
    temporal_quantiles,
    write_edge_list,
    write_pajek,
    _sample_permutations,
)

CSV_FILES = (
    "regions.csv",
    "hit_rate.csv",
    "clusters_vs_tau.csv",
    "edge_fraction_vs_tau.csv",
    "degree_pdf.csv",
    "temporal_quantiles.csv",
    "fully_connected.csv",
    "observability.csv",
)
SUMMARY_FILE = "summary.json"


def _write_csv(path, seed, header, rows):
    lines = [f"# rffkit={__version__} seed={seed}", header]
    lines += [",".join(str(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def pooled_observability(matrices, tau, mode, edge_rule, enum_budget, n_samples, seed,
                         quantiles=DEFAULT_QUANTILES):
    """Coverage quantiles per subset size, pooled across transmitters."""
    graphs = {tx: build_graph(m, tau, edge_rule) for tx, m in matrices.items()}
    max_n = max(m.n for m in matrices.values())
    perms = {
        n: _sample_permutations(n, n_samples, seed)
        for n in {m.n for m in matrices.values()}
        if any(math.comb(n, k) > enum_budget for k in range(1, n + 1))
    }
    points = []
    for k in range(1, max_n + 1):
        pool = []
        methods = set()
        for tx, matrix in matrices.items():
            if k > matrix.n:
                continue
            coverages, method = observability_coverages(
                matrix, tau, k, mode, edge_rule, enum_budget, n_samples, seed,
                _graph=graphs[tx], _perms=perms.get(matrix.n),
            )
            pool.append(coverages)
            methods.add(method)
        pooled = np.concatenate(pool)
        values = np.quantile(pooled, quantiles)
        points.append(
            ObservabilityPoint(
                subset_size=k,
                n_subsets=int(pooled.size),
                method="exact" if methods == {"exact"} else "sampled",
                quantiles=dict(zip(quantiles, values)),
            )
        )
    return points


def emit_report(spec, matrices, ground_truth=None):
    """Write the full analytics bundle for complete matrices.

    `matrices` maps transmitter_id -> complete DissimilarityMatrix;
    `ground_truth` optionally maps (tx_id, measurement_index) -> latent_id,
    adding a partition-agreement score to the summary. Returns the summary
    path. Output bytes depend only on (spec, matrices, ground_truth).
    """
    cfg = spec.analytics
    out = spec.report_dir
    out.mkdir(parents=True, exist_ok=True)
    graphs_dir = out / "graphs"
    graphs_dir.mkdir(exist_ok=True)
    seed = spec.seed
    tx_ids = sorted(matrices)
    pool = [matrices[tx] for tx in tx_ids]

    regions = region_decomposition(pool, cfg.region_eps_hi, cfg.region_eps_lo)
    _write_csv(
        out / "regions.csv", seed, "region,count,fraction",
        [
            ("R1", regions.r1_count, regions.r1_count / regions.total),
            ("R2", regions.r2_count, regions.r2_count / regions.total),
            ("R3", regions.r3_count, regions.r3_count / regions.total),
        ],
    )
    _write_csv(
        out / "hit_rate.csv", seed, "rank,delta",
        [(rank + 1, delta) for rank, delta in enumerate(regions.sorted_delta)],
    )

    _write_csv(
        out / "clusters_vs_tau.csv", seed, "tx_id,tau,n_clusters",
        [
            (tx, tau, count)
            for tx in tx_ids
            for tau, count in cluster_count_vs_tau(matrices[tx], cfg.tau_grid, cfg.edge_rule)
        ],
    )
    _write_csv(
        out / "edge_fraction_vs_tau.csv", seed, "tx_id,tau,edge_fraction",
        [
            (tx, tau, frac)
            for tx in tx_ids
            for tau, frac in edge_fraction_vs_tau(matrices[tx], cfg.tau_grid, cfg.edge_rule)
        ],
    )

    pdfs = degree_pdf(pool, cfg.degree_taus, cfg.edge_rule)
    _write_csv(
        out / "degree_pdf.csv", seed, "tau,degree,probability",
        [
            (tau, degree, pdfs[tau][degree])
            for tau in cfg.degree_taus
            for degree in range(pdfs[tau].size)
        ],
    )

    temporal = temporal_quantiles(pool)
    _write_csv(
        out / "temporal_quantiles.csv", seed, "distance,n_pairs,q05,q50,q95",
        [
            (row.distance, row.n_pairs, row.quantiles[0.05], row.quantiles[0.5], row.quantiles[0.95])
            for row in temporal
        ],
    )

    fc_rows = []
    pooled_fc = {}
    for k in cfg.subset_sizes:
        hits = total = 0
        for tx in tx_ids:
            ratio = fully_connected_ratio(matrices[tx], cfg.cluster_tau, k, cfg.edge_rule)
            possible = math.comb(matrices[tx].n, k)
            fc_rows.append((tx, k, ratio))
            hits += round(ratio * possible)
            total += possible
        pooled_fc[k] = hits / total
        fc_rows.append(("pooled", k, pooled_fc[k]))
    _write_csv(out / "fully_connected.csv", seed, "tx_id,k,fully_connected_ratio", fc_rows)

    observability = pooled_observability(
        matrices, cfg.cluster_tau, cfg.observability_mode, cfg.edge_rule,
        cfg.enum_budget, cfg.observability_samples, seed,
    )
    _write_csv(
        out / "observability.csv", seed, "subset_size,n_subsets,method,q05,q50,q95",
        [
            (p.subset_size, p.n_subsets, p.method,
             p.quantiles[0.05], p.quantiles[0.5], p.quantiles[0.95])
            for p in observability
        ],
    )

    provenance = f"rffkit={__version__} seed={seed}"
    cluster_counts = {}
    agreement = None if ground_truth is None else {}
    for tx in tx_ids:
        graph = build_graph(matrices[tx], cfg.cluster_tau, cfg.edge_rule)
        partition = clusters(graph)
        cluster_counts[tx] = len(partition)
        write_edge_list(graph, graphs_dir / f"tx{tx:02d}_edges.csv", comment=provenance)
        write_pajek(graph, graphs_dir / f"tx{tx:02d}.net", comment=provenance)
        if ground_truth is not None:
            pred = partition_labels(partition, matrices[tx].n)[1:]
            true = [ground_truth[(tx, m)] for m in range(1, matrices[tx].n + 1)]
            agreement[tx] = adjusted_rand_index(true, pred)

    summary = {
        "toolkit_version": __version__,
        "seed": seed,
        "run_spec": spec.to_json_dict(),
        "pair_counts": {
            "per_transmitter": {str(tx): len(matrices[tx]) for tx in tx_ids},
            "pooled": int(sum(len(matrices[tx]) for tx in tx_ids)),
        },
        "regions": {
            "r1": regions.r1_count,
            "r2": regions.r2_count,
            "r3": regions.r3_count,
            "total": regions.total,
            "eps_hi": regions.eps_hi,
            "eps_lo": regions.eps_lo,
        },
        "clusters_at_tau": {"tau": cfg.cluster_tau, "per_transmitter": {str(tx): cluster_counts[tx] for tx in tx_ids}},
        "fully_connected_pooled": {str(k): pooled_fc[k] for k in cfg.subset_sizes},
        "observability_min_k": {
            "median_target": 0.9,
            "subset_size": min_subset_for_coverage(observability, 0.9),
        },
        "partition_agreement": (
            None
            if agreement is None
            else {
                "tau": cfg.cluster_tau,
                "adjusted_rand_index": {str(tx): agreement[tx] for tx in tx_ids},
            }
        ),
    }
    summary_path = out / SUMMARY_FILE
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return summary_path
