"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. The end-to-end criteria
build a full 5x25 synthetic corpus (~1 GB under the pytest tmp area) and
exercise the CLI pipeline exactly as a user would.
"""

import json
import math
import shutil
import struct
import time
from contextlib import contextmanager
from itertools import combinations

import numpy as np
import pytest

from rffkit.cli import main
from rffkit.dataset import (
    ChecksumMismatchError,
    IndexGapError,
    SizeMismatchError,
    load_corpus,
    read_iq,
    write_iq,
)
from rffkit.discriminator import SplitSpec, TrainConfig, pair_delta
from rffkit.graph import (
    build_graph,
    cluster_count_vs_tau,
    clusters,
    degree_pdf,
    edge_fraction_vs_tau,
    fully_connected_ratio,
    observability_coverages,
    observability_curve,
)
from rffkit.imaging import image_stack, iq_to_image, segment_measurement
from rffkit.synth import MutationModel, sample_state_set, synth_measurement

from conftest import build_corpus, random_trace
from test_graph import bfs_components, random_matrix
from test_imaging import brute_force_bins


@contextmanager
def criterion(number, description):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {number} FAIL: {description}")
        raise
    print(f"ACCEPTANCE {number} PASS: {description}")


# ---------------------------------------------------------------------------
# Shared desk-profile pair generation (criteria 2 and 3)

SAMPLES_PER_IMAGE = 10_000
IMAGES_PER_MEAS = 100


def _pair_images(state, model, pair_index, leg):
    seed = np.random.SeedSequence(1001, spawn_key=(pair_index, leg))
    samples = synth_measurement(state, model, SAMPLES_PER_IMAGE * IMAGES_PER_MEAS, seed)
    return image_stack(segment_measurement(samples, SAMPLES_PER_IMAGE, IMAGES_PER_MEAS))


def _regime_deltas(model, n_pairs, distinct_states):
    deltas = []
    for p in range(n_pairs):
        states = sample_state_set(model, np.random.SeedSequence(model.seed, spawn_key=(p,)))
        state_x = states[0]
        state_y = states[1] if distinct_states else states[0]
        images_x = _pair_images(state_x, model, p, 0)
        images_y = _pair_images(state_y, model, p, 1)
        rec = pair_delta(images_x, images_y, SplitSpec(shuffle_seed=p), TrainConfig())
        deltas.append(rec.delta)
    return np.array(deltas)


# ---------------------------------------------------------------------------
# End-to-end fixture: the default acceptance corpus (criterion 4)

ACCEPTANCE_SPEC = {
    "schema_version": 1,
    "seed": 7,
    "out_dir": "run",
    "corpus": {"synth": {"n_tx": 5, "n_meas": 25}},
}


@pytest.fixture(scope="session")
def acceptance_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    spec_path = root / "spec.json"
    spec_path.write_text(json.dumps(ACCEPTANCE_SPEC))
    started = time.monotonic()
    assert main(["simulate", "--spec", str(spec_path)]) == 0
    assert main(["matrix", "--spec", str(spec_path), "--workers", "2"]) == 0
    assert main(["report", "--spec", str(spec_path)]) == 0
    elapsed = time.monotonic() - started
    return {"root": root / "run", "spec_path": spec_path, "elapsed": elapsed}


# ---------------------------------------------------------------------------


def test_criterion_1_binning_oracle(rng):
    with criterion(1, "iq_to_image matches the brute-force binning oracle"):
        started = time.monotonic()
        for _ in range(50):
            scale = rng.uniform(0.5, 2.0)
            segment = scale * (rng.normal(0, 0.7, 10_000) + 1j * rng.normal(0, 0.7, 10_000))
            half = rng.uniform(0.5, 2.5)
            extent = (-half, half, -half, half)
            got = iq_to_image(segment, extent).counts
            assert np.array_equal(got, brute_force_bins(segment, extent))
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"binning oracle took {elapsed:.1f}s"


def test_criterion_2_same_fingerprint_calibration():
    with criterion(2, "same-latent-state pairs give median delta in [0.45, 0.60]"):
        started = time.monotonic()
        model = MutationModel(num_latent_states=1, seed=1000)
        deltas = _regime_deltas(model, 20, distinct_states=False)
        elapsed = time.monotonic() - started
        median = float(np.median(deltas))
        assert 0.45 <= median <= 0.60, f"median delta {median} outside [0.45, 0.60]"
        assert elapsed < 300.0, f"calibration run took {elapsed:.0f}s"


def test_criterion_3_mutated_fingerprint_separation():
    with criterion(3, "well-separated latent states give every delta >= 0.95"):
        started = time.monotonic()
        model = MutationModel(num_latent_states=2, state_separation=2.0, seed=300)
        deltas = _regime_deltas(model, 20, distinct_states=True)
        elapsed = time.monotonic() - started
        assert deltas.min() >= 0.95, f"min delta {deltas.min()} below 0.95"
        assert elapsed < 300.0, f"separation run took {elapsed:.0f}s"


def test_criterion_4_end_to_end_structure_recovery(acceptance_run):
    with criterion(4, "5x25 corpus recovers the latent two-state structure at tau=0.75"):
        corpus = load_corpus(acceptance_run["root"] / "corpus" / "manifest.json")
        assert len(corpus) == 125  # 25 measurements x 5 transmitters
        summary = json.loads((acceptance_run["root"] / "report" / "summary.json").read_text())
        assert summary["pair_counts"]["pooled"] == 1500  # 300 pairs x 5
        assert all(v == 300 for v in summary["pair_counts"]["per_transmitter"].values())
        agreement = summary["partition_agreement"]["adjusted_rand_index"]
        assert summary["partition_agreement"]["tau"] == 0.75
        assert len(agreement) == 5
        for tx, ari in agreement.items():
            assert ari >= 0.9, f"transmitter {tx} ARI {ari} below 0.9"
        counts = summary["clusters_at_tau"]["per_transmitter"]
        two_state = sum(1 for c in counts.values() if c == 2)
        assert two_state >= 4, f"only {two_state} of 5 transmitters recovered 2 clusters"
        assert acceptance_run["elapsed"] < 1800.0


def test_criterion_5_graph_oracle_suite(rng):
    with criterion(5, "graph analytics match brute-force oracles on 100 random graphs"):
        for trial in range(100):
            n = int(rng.integers(2, 13))
            matrix = random_matrix(rng, n)
            tau = float(rng.integers(1, 100)) / 100
            graph = build_graph(matrix, tau)
            pairs = list(combinations(range(1, n + 1), 2))

            # connected components vs breadth-first search
            parts = bfs_components(n, graph.edges)
            assert clusters(graph) == parts

            # degree tally
            pmf = degree_pdf([matrix], [tau])[tau]
            degrees = [
                sum(1 for o in range(1, n + 1) if o != v and matrix.delta(v, o) < tau)
                for v in range(1, n + 1)
            ]
            expect = np.bincount(degrees, minlength=n) / n
            assert np.array_equal(pmf, expect)

            # edge fraction via pair scan
            frac = dict(edge_fraction_vs_tau(matrix, [tau]))[tau]
            assert frac == sum(1 for p in pairs if matrix.delta(*p) < tau) / len(pairs)

            # fully-connected subset ratios, exact subset scan
            for k in (2, 3, 4):
                if k > n:
                    continue
                hits = sum(
                    1 for sub in combinations(range(1, n + 1), k)
                    if all(matrix.delta(*p) < tau for p in combinations(sub, 2))
                )
                assert fully_connected_ratio(matrix, tau, k) == hits / math.comb(n, k)
            assert fully_connected_ratio(matrix, tau, 2) == frac

            # observability closures (both modes) on one subset size per trial
            k = int(rng.integers(1, n + 1))
            subsets = list(combinations(range(1, n + 1), k))
            comp_of = {v: tuple(part) for part in parts for v in part}
            closure_cov = [
                len(set().union(*(comp_of[v] for v in sub))) / n for sub in subsets
            ]
            got, method = observability_coverages(matrix, tau, k)
            assert method == "exact"
            assert np.allclose(got, closure_cov)

            adj = {v: {v} for v in range(1, n + 1)}
            for x, y in graph.edges:
                adj[x].add(y)
                adj[y].add(x)
            adj_cov = [len(set().union(*(adj[v] for v in sub))) / n for sub in subsets]
            got_adj, _ = observability_coverages(matrix, tau, k, mode="adjacency")
            assert np.allclose(got_adj, adj_cov)


def test_criterion_6_combinatorial_identities():
    with criterion(6, "subset and temporal pair counts match the 5x25 layout"):
        assert math.comb(25, 2) == 300
        assert math.comb(25, 3) == 2300
        assert math.comb(25, 4) == 12650
        from rffkit.graph import temporal_quantiles
        from test_graph import constant_matrix

        matrices = [constant_matrix(25, 0.7, tx_id=t) for t in range(1, 6)]
        rows = {r.distance: r.n_pairs for r in temporal_quantiles(matrices)}
        assert rows[1] == 120
        assert rows[24] == 5

        matrix = constant_matrix(25, 0.5)
        for k, total in ((2, 300), (3, 2300), (4, 12650)):
            ratio = fully_connected_ratio(matrix, 0.75, k)
            assert ratio == 1.0
            assert round(ratio * math.comb(25, k)) == total


def test_criterion_7_monotonicity_sweep(rng):
    with criterion(7, "strict-rule analytics are monotone over a 21-point tau grid"):
        taus = [round(x, 3) for x in np.linspace(0.0, 1.0, 21)]
        for _ in range(10):
            n = int(rng.integers(5, 11))
            matrix = random_matrix(rng, n)

            counts = [c for _, c in cluster_count_vs_tau(matrix, taus)]
            assert all(b <= a for a, b in zip(counts, counts[1:]))

            fracs = [f for _, f in edge_fraction_vs_tau(matrix, taus)]
            assert all(b >= a for a, b in zip(fracs, fracs[1:]))

            degrees = np.array([build_graph(matrix, t).degrees()[1:] for t in taus])
            assert np.all(np.diff(degrees, axis=0) >= 0)

            for k in (2, 3, 4):
                ratios = [fully_connected_ratio(matrix, t, k) for t in taus]
                assert all(b >= a for a, b in zip(ratios, ratios[1:]))

            medians = np.array([
                [p.quantiles[0.5] for p in observability_curve(matrix, t)] for t in taus
            ])
            assert np.all(np.diff(medians, axis=0) >= -1e-12)


DETERMINISM_SPEC = {
    "schema_version": 1,
    "seed": 23,
    "out_dir": "run",
    "corpus": {"synth": {"n_tx": 2, "n_meas": 5, "state_separation": 2.0}},
    "imaging": {"samples_per_image": 1000, "images_per_measurement": 20},
}


def test_criterion_8_pipeline_determinism(tmp_path):
    with criterion(8, "worker counts 1 and 8 produce byte-identical matrices and reports"):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(DETERMINISM_SPEC))
        run_dir = tmp_path / "run"

        def run_pipeline(workers):
            assert main(["simulate", "--spec", str(spec_path)]) == 0
            assert main(["matrix", "--spec", str(spec_path), "--workers", str(workers)]) == 0
            assert main(["report", "--spec", str(spec_path)]) == 0
            outputs = {}
            for path in sorted([*run_dir.glob("matrices/*.json"), *run_dir.rglob("report/**/*")]):
                if path.is_file():
                    outputs[str(path.relative_to(run_dir))] = path.read_bytes()
            shutil.rmtree(run_dir)
            return outputs

        first = run_pipeline(workers=1)
        second = run_pipeline(workers=8)
        assert sorted(first) == sorted(second)
        for name in first:
            assert first[name] == second[name], f"{name} differs between worker counts"


def test_criterion_9_round_trip_and_corruption(tmp_path, rng):
    with criterion(9, "1000 random traces round-trip; all corruption classes rejected"):
        path = tmp_path / "trace.iq"
        for _ in range(1000):
            trace = random_trace(rng, n_samples=int(rng.integers(1, 257)))
            write_iq(trace, path)
            back = read_iq(path, len(trace))
            assert back.tobytes() == trace.samples.tobytes()

        # size corruption
        manifest = build_corpus(tmp_path / "size", {1: 3})
        victim = tmp_path / "size" / "tx01_m002.iq"
        victim.write_bytes(victim.read_bytes()[:-4])
        with pytest.raises(SizeMismatchError):
            load_corpus(manifest)

        # checksum corruption
        manifest = build_corpus(tmp_path / "crc", {1: 3})
        victim = tmp_path / "crc" / "tx01_m003.iq"
        raw = bytearray(victim.read_bytes())
        raw[4] ^= 0xFF
        victim.write_bytes(bytes(raw))
        with pytest.raises(ChecksumMismatchError):
            load_corpus(manifest)

        # index gap
        manifest = build_corpus(tmp_path / "gap", {1: 3})
        doc = json.loads(manifest.read_text())
        doc["transmitters"][0]["measurements"] = [
            m for m in doc["transmitters"][0]["measurements"] if m["measurement_index"] != 2
        ]
        manifest.write_text(json.dumps(doc))
        with pytest.raises(IndexGapError):
            load_corpus(manifest)
