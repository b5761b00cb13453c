"""Command-line orchestration of the full pipeline.

Subcommands: `simulate` (synthetic corpus), `images` (PNG export), `matrix`
(pairwise dissimilarity, resumable), `report` (analytics bundle), and
`validate` (corpus check only). All state lives in the run directory named
by the run spec; progress logs are line-delimited JSON and are the only
place timestamps appear.

Exit codes: 0 success, 1 validation failure, 2 incomplete computation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DatasetError, load_corpus
from .discriminator import (
    DissimilarityMatrix,
    ExternalDiscriminator,
    SplitSpec,
    dissimilarity_matrix,
    dissimilarity_matrix_from_features,
    load_matrix,
    pooled_features,
    save_matrix,
)
from .imaging import export_png, image_stack, segment_measurement
from .reports import emit_report
from .runspec import RunSpecError, load_runspec
from .synth import load_ground_truth, synth_corpus

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INCOMPLETE = 2


class JsonlLog:
    """Append-only line-delimited JSON progress log."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, **fields):
        fields["ts"] = round(time.time(), 3)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(fields) + "\n")


def _measurement_tiles(corpus, tx_id, m, imaging):
    trace = corpus.trace(tx_id, m)
    return segment_measurement(
        trace.samples,
        imaging.samples_per_image,
        imaging.images_per_measurement,
        transmitter_id=tx_id,
        measurement_index=m,
        extent_quantile=imaging.extent_quantile,
    )


def cmd_simulate(spec, args):
    """Write the synthetic corpus plus ground-truth sidecar to disk."""
    if spec.corpus_manifest is not None:
        print("simulate requires a synthetic corpus source, not an external manifest",
              file=sys.stderr)
        return EXIT_VALIDATION
    model = spec.synth.mutation_model(spec.seed)
    manifest, labels = synth_corpus(
        model,
        spec.synth.n_tx,
        spec.synth.n_meas,
        spec.samples_per_measurement(),
        spec.corpus_dir,
        sample_rate_hz=spec.synth.sample_rate_hz,
        center_freq_hz=spec.synth.center_freq_hz,
    )
    log = JsonlLog(spec.logs_dir / "simulate.jsonl")
    log.write(event="simulated", transmitters=spec.synth.n_tx,
              measurements=spec.synth.n_meas, labels=len(labels))
    print(spec.manifest_path)
    return EXIT_OK


def cmd_validate(spec, args):
    """Corpus check only: load and fully validate the manifest."""
    corpus = load_corpus(spec.manifest_path)
    per_tx = {tx: len(corpus.measurement_indices(tx)) for tx in corpus.transmitter_ids}
    print(f"corpus ok: {len(corpus)} measurements, "
          f"{len(per_tx)} transmitters {per_tx}")
    return EXIT_OK


def cmd_images(spec, args):
    """Export every measurement's tile images as grayscale PNGs."""
    corpus = load_corpus(spec.manifest_path)
    written = 0
    for tx_id in corpus.transmitter_ids:
        for m in corpus.measurement_indices(tx_id):
            out = spec.images_dir / f"tx{tx_id:02d}" / f"m{m:03d}"
            out.mkdir(parents=True, exist_ok=True)
            for tile in _measurement_tiles(corpus, tx_id, m, spec.imaging):
                export_png(tile, out / f"seg{tile.source[2]:03d}.png")
                written += 1
    print(f"wrote {written} images under {spec.images_dir}")
    return EXIT_OK


def cmd_matrix(spec, args):
    """Compute per-transmitter dissimilarity matrices; interrupt-safe resume.

    Already-computed entries are skipped on rerun; every completed entry is
    persisted atomically before the next starts.
    """
    corpus = load_corpus(spec.manifest_path)
    plugin = None
    if spec.discriminator.uses_plugin:
        plugin = ExternalDiscriminator(command=spec.discriminator.plugin_command)
    workers = max(1, args.workers)
    log = JsonlLog(spec.logs_dir / "matrix.jsonl")
    spec.matrices_dir.mkdir(parents=True, exist_ok=True)

    incomplete = []
    for tx_id in corpus.transmitter_ids:
        indices = corpus.measurement_indices(tx_id)
        path = spec.matrix_path(tx_id)
        matrix = load_matrix(path) if path.is_file() else DissimilarityMatrix(tx_id, len(indices))
        todo = len(matrix.missing_pairs())
        log.write(event="transmitter", tx_id=tx_id, pairs_missing=todo)
        if todo:
            started = time.monotonic()

            def on_entry(record, path=path, matrix=matrix, started=started):
                save_matrix(matrix, path)
                log.write(
                    event="pair", tx_id=record.tx_id, pair=list(record.pair),
                    delta=record.delta, elapsed_s=round(time.monotonic() - started, 3),
                )

            if plugin is None:
                # Stream pooling one measurement at a time so paper-scale
                # stacks never sit in memory together.
                features = {}
                for m in indices:
                    tiles = _measurement_tiles(corpus, tx_id, m, spec.imaging)
                    features[m] = pooled_features(image_stack(tiles))
                matrix = dissimilarity_matrix_from_features(
                    features, tx_id, SplitSpec(), spec.discriminator.reference,
                    master_seed=spec.seed, existing=matrix, workers=workers,
                    on_entry=on_entry,
                )
            else:
                stacks = {
                    m: image_stack(_measurement_tiles(corpus, tx_id, m, spec.imaging)).astype(np.uint32)
                    for m in indices
                }
                matrix = dissimilarity_matrix(
                    stacks, tx_id, SplitSpec(),
                    master_seed=spec.seed, existing=matrix, workers=workers,
                    plugin=plugin, plugin_workdir=None, on_entry=on_entry,
                )
            save_matrix(matrix, path)
        if not matrix.complete:
            incomplete.append((tx_id, matrix.missing_pairs(), matrix.errors))

    if incomplete:
        for tx_id, missing, errors in incomplete:
            print(f"transmitter {tx_id}: {len(missing)} entries missing", file=sys.stderr)
            for pair, message in errors.items():
                print(f"  pair {pair}: {message}", file=sys.stderr)
        return EXIT_INCOMPLETE
    print(f"matrices complete under {spec.matrices_dir}")
    return EXIT_OK


def cmd_report(spec, args):
    """Emit the analytics bundle; hard error when any matrix is incomplete."""
    corpus = load_corpus(spec.manifest_path)
    matrices = {}
    for tx_id in corpus.transmitter_ids:
        path = spec.matrix_path(tx_id)
        if not path.is_file():
            print(f"no matrix for transmitter {tx_id}: {path}", file=sys.stderr)
            return EXIT_INCOMPLETE
        matrix = load_matrix(path)
        if not matrix.complete:
            print(
                f"matrix for transmitter {tx_id} incomplete; missing pairs: "
                f"{matrix.missing_pairs()}",
                file=sys.stderr,
            )
            return EXIT_INCOMPLETE
        matrices[tx_id] = matrix

    ground_truth = None
    if spec.ground_truth_path.is_file():
        ground_truth = load_ground_truth(spec.ground_truth_path)
    summary_path = emit_report(spec, matrices, ground_truth)
    print(summary_path)
    return EXIT_OK


_COMMANDS = {
    "simulate": (cmd_simulate, "generate a synthetic corpus with ground-truth labels"),
    "images": (cmd_images, "export constellation-histogram PNGs per measurement"),
    "matrix": (cmd_matrix, "compute pairwise dissimilarity matrices (resumable)"),
    "report": (cmd_report, "emit the analytics CSV/JSON bundle"),
    "validate": (cmd_validate, "validate a corpus manifest and its files"),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rffkit",
        description="RF-fingerprint reliability analytics across FPGA-image reloads",
    )
    parser.add_argument("--version", action="version", version=f"rffkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--spec", required=True, help="run-spec JSON file")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--out-dir", default=None, help="override the run directory")
        if name == "matrix":
            sp.add_argument(
                "--workers", type=int, default=os.cpu_count() or 1,
                help="parallel pair jobs (default: available parallelism)",
            )
        sp.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = load_runspec(args.spec, seed=args.seed, out_dir=args.out_dir)
        return args.func(spec, args)
    except (RunSpecError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
