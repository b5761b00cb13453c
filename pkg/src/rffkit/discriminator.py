"""Pairwise dissimilarity check between measurements.

D(Mx, My) = delta: split the two measurements' images into train/val/test,
fit a binary discriminator on train, pick the best-validation epoch, and
report held-out test accuracy as the dissimilarity index. delta ~ 0.5 means
the two measurements are indistinguishable (same fingerprint); delta ~ 1
means the fingerprint changed.

Ships a deterministic reference discriminator (average-pooled count grids ->
log1p -> standardize -> L2 logistic regression by full-batch gradient
descent) plus a plug-in contract for external classifiers such as CNNs.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import subprocess
import tempfile
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .imaging import GRID, TileImage, export_png, image_stack

POOLED = 28  # 224x224 count grids are average-pooled to 28x28 features
_POOL_FACTOR = GRID // POOLED

REFERENCE_ID = "reference-pooled-logreg"


@dataclass(frozen=True)
class SplitSpec:
    """Per-pair train/val/test split fractions and shuffle seed."""

    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    shuffle_seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ValueError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions {fracs} must sum to 1")


@dataclass(frozen=True)
class TrainConfig:
    """Reference-discriminator hyperparameters (all fixed => deterministic)."""

    epochs: int = 200
    learning_rate: float = 0.3
    l2: float = 0.05
    seed: int = 0


@dataclass
class LabeledSet:
    """A stack of count grids with binary labels (0 = measurement x, 1 = y)."""

    images: np.ndarray  # (n, 224, 224)
    labels: np.ndarray  # (n,)

    def __len__(self):
        return int(self.labels.size)


def _to_stack(images):
    if isinstance(images, np.ndarray):
        return images
    if len(images) and isinstance(images[0], TileImage):
        return image_stack(images)
    return np.asarray(images)


def _split_counts(n, spec):
    # Boundaries from rounded cumulative fractions: floor(0.6*500) is 299 in
    # IEEE doubles, which would corrupt the canonical 500 -> 300/100/100 split.
    t_end = round(spec.train_frac * n)
    v_end = round((spec.train_frac + spec.val_frac) * n)
    counts = (t_end, v_end - t_end, n - v_end)
    if min(counts) < 1:
        raise ValueError(
            f"{n} images per class cannot fill non-empty "
            f"{spec.train_frac}/{spec.val_frac}/{spec.test_frac} splits"
        )
    return counts


def split_indices(n_x, n_y, spec):
    """Seeded per-class shuffle followed by a contiguous split.

    Returns ((train_x, val_x, test_x), (train_y, val_y, test_y)) index
    arrays, preserving class balance within each split.
    """
    if n_x < 1 or n_y < 1:
        raise ValueError("both image lists must be non-empty")
    rng = np.random.default_rng(spec.shuffle_seed)
    out = []
    for n in (n_x, n_y):
        perm = rng.permutation(n)
        n_train, n_val, _ = _split_counts(n, spec)
        out.append((perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]))
    return tuple(out)


def split_images(images_x, images_y, spec):
    """Split a measurement pair's images into labeled train/val/test sets."""
    stack_x, stack_y = _to_stack(images_x), _to_stack(images_y)
    parts_x, parts_y = split_indices(stack_x.shape[0], stack_y.shape[0], spec)

    sets = []
    for ix, iy in zip(parts_x, parts_y):
        images = np.concatenate([stack_x[ix], stack_y[iy]])
        labels = np.concatenate([np.zeros(len(ix), dtype=np.int64), np.ones(len(iy), dtype=np.int64)])
        sets.append(LabeledSet(images=images, labels=labels))
    return tuple(sets)


def pooled_features(stack):
    """(n, 224, 224) count grids -> (n, 784) log1p average-pooled features."""
    stack = np.asarray(stack, dtype=np.float64)
    n = stack.shape[0]
    pooled = stack.reshape(n, POOLED, _POOL_FACTOR, POOLED, _POOL_FACTOR).mean(axis=(2, 4))
    return np.log1p(pooled).reshape(n, POOLED * POOLED)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


@dataclass(frozen=True)
class FittedDiscriminator:
    """Frozen reference-discriminator parameters from the best-val epoch."""

    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_sd: np.ndarray
    best_epoch: int
    val_accuracy: float
    config: TrainConfig
    discriminator_id: str = REFERENCE_ID

    def predict_features(self, feats):
        z = np.einsum("ij,j->i", (feats - self.feature_mean) / self.feature_sd, self.weights)
        return (z + self.bias >= 0.0).astype(np.int64)

    def predict(self, images):
        return self.predict_features(pooled_features(_to_stack(images)))


def _accuracy(pred, labels):
    return float(np.mean(pred == labels))


def _fit_logreg(train_x, train_y, val_x, val_y, config):
    m, d = train_x.shape
    n1 = int(train_y.sum())
    n0 = m - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("training set must contain both classes")

    mean = train_x.mean(axis=0)
    sd = train_x.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    xt = (train_x - mean) / sd
    xv = (val_x - mean) / sd
    yt = train_y.astype(np.float64)

    # Class-prior bias start: the untrained model predicts the majority class.
    w = np.zeros(d)
    b = float(np.log(n1 / n0))

    def val_acc(w, b):
        z = np.einsum("ij,j->i", xv, w) + b
        return _accuracy((z >= 0.0).astype(np.int64), val_y)

    best = (val_acc(w, b), 0, w.copy(), b)
    for epoch in range(1, config.epochs + 1):
        z = np.einsum("ij,j->i", xt, w) + b
        err = _sigmoid(z) - yt
        # einsum keeps the reduction order fixed, independent of BLAS threading
        grad_w = np.einsum("ij,i->j", xt, err) / m + config.l2 * w
        w = w - config.learning_rate * grad_w
        b = b - config.learning_rate * float(err.mean())
        acc = val_acc(w, b)
        if acc > best[0]:
            best = (acc, epoch, w.copy(), b)

    acc, epoch, w, b = best
    return FittedDiscriminator(
        weights=w,
        bias=b,
        feature_mean=mean,
        feature_sd=sd,
        best_epoch=epoch,
        val_accuracy=acc,
        config=config,
    )


def reference_train(train, val, config=TrainConfig()):
    """Fit the reference discriminator on labeled image sets.

    Deterministic: pooled/standardized features, zero-initialized weights,
    fixed epochs and learning rate, full-batch gradient descent; the
    parameters from the best-validation epoch (epoch 0 = untrained baseline
    included) are retained.
    """
    return _fit_logreg(
        pooled_features(train.images),
        np.asarray(train.labels),
        pooled_features(val.images),
        np.asarray(val.labels),
        config,
    )


def evaluate_delta(disc, test):
    """Held-out accuracy = dissimilarity index; granularity 1/len(test)."""
    if len(test) == 0:
        raise ValueError("test set must be non-empty")
    return _accuracy(disc.predict(test.images), np.asarray(test.labels))


# ---------------------------------------------------------------------------
# Dissimilarity records and matrices


@dataclass(frozen=True)
class DissimilarityRecord:
    """One computed delta with its provenance."""

    tx_id: int
    pair: tuple  # (x, y), x < y
    delta: float
    correct: int
    total: int
    discriminator_id: str
    seed: int

    def __post_init__(self):
        x, y = self.pair
        if not x < y:
            raise ValueError(f"pair {self.pair} must satisfy x < y")
        if self.total < 1 or not 0 <= self.correct <= self.total:
            raise ValueError(f"bad test counts {self.correct}/{self.total}")
        exact = self.correct / self.total
        if abs(self.delta - exact) > 1e-12:
            raise ValueError(f"delta {self.delta} != correct/total {exact}")
        object.__setattr__(self, "delta", exact)
        object.__setattr__(self, "pair", (int(x), int(y)))

    def to_json_dict(self):
        return {
            "pair": list(self.pair),
            "delta": self.delta,
            "correct": self.correct,
            "total": self.total,
            "discriminator_id": self.discriminator_id,
            "seed": self.seed,
        }


class DissimilarityMatrix:
    """Symmetric per-transmitter matrix of delta values over measurement pairs.

    Entries are stored once per unordered pair; the diagonal is undefined.
    Failed entries (plug-in errors) are kept separately and leave the matrix
    incomplete.
    """

    def __init__(self, tx_id, n):
        if n < 2:
            raise ValueError("a matrix needs at least 2 measurements")
        self.tx_id = int(tx_id)
        self.n = int(n)
        self._records = {}
        self._errors = {}

    @staticmethod
    def _key(x, y):
        x, y = int(x), int(y)
        if x == y:
            raise KeyError("diagonal entries are undefined")
        return (x, y) if x < y else (y, x)

    def _check_pair(self, pair):
        x, y = pair
        if not (1 <= x < y <= self.n):
            raise ValueError(f"pair {pair} out of range for n={self.n}")

    def add(self, record):
        self._check_pair(record.pair)
        self._records[record.pair] = record
        self._errors.pop(record.pair, None)

    def record_error(self, x, y, message):
        key = self._key(x, y)
        self._check_pair(key)
        if key not in self._records:
            self._errors[key] = str(message)

    def has(self, x, y):
        return self._key(x, y) in self._records

    def record(self, x, y):
        return self._records[self._key(x, y)]

    def delta(self, x, y):
        return self._records[self._key(x, y)].delta

    def all_pairs(self):
        return [(x, y) for x in range(1, self.n) for y in range(x + 1, self.n + 1)]

    def missing_pairs(self):
        return [p for p in self.all_pairs() if p not in self._records]

    @property
    def complete(self):
        return not self.missing_pairs()

    @property
    def errors(self):
        return dict(self._errors)

    def records(self):
        return [self._records[p] for p in sorted(self._records)]

    def values(self):
        """Deltas of all present entries in pair order."""
        return np.array([r.delta for r in self.records()])

    def __len__(self):
        return len(self._records)

    def to_json_dict(self):
        return {
            "schema_version": 1,
            "tx_id": self.tx_id,
            "n": self.n,
            "records": [r.to_json_dict() for r in self.records()],
            "errors": [
                {"pair": list(p), "error": msg} for p, msg in sorted(self._errors.items())
            ],
        }

    @classmethod
    def from_json_dict(cls, doc):
        matrix = cls(doc["tx_id"], doc["n"])
        for r in doc["records"]:
            matrix.add(
                DissimilarityRecord(
                    tx_id=doc["tx_id"],
                    pair=tuple(r["pair"]),
                    delta=r["delta"],
                    correct=r["correct"],
                    total=r["total"],
                    discriminator_id=r["discriminator_id"],
                    seed=r["seed"],
                )
            )
        for e in doc.get("errors", []):
            matrix.record_error(*e["pair"], e["error"])
        return matrix

    @classmethod
    def from_deltas(cls, tx_id, n, deltas, total=1000, discriminator_id="synthetic", seed=0):
        """Build a matrix from raw {(x, y): delta} values (quantized to 1/total)."""
        matrix = cls(tx_id, n)
        for (x, y), delta in deltas.items():
            correct = round(delta * total)
            matrix.add(
                DissimilarityRecord(
                    tx_id=tx_id,
                    pair=(min(x, y), max(x, y)),
                    delta=correct / total,
                    correct=correct,
                    total=total,
                    discriminator_id=discriminator_id,
                    seed=seed,
                )
            )
        return matrix


def save_matrix(matrix, path):
    """Persist as a single JSON document, atomically (tmp + rename)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(matrix.to_json_dict(), indent=1) + "\n")
    os.replace(tmp, path)


def load_matrix(path):
    return DissimilarityMatrix.from_json_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Pair jobs: reference (in-process) and external plug-in


def pair_seeds(master_seed, tx_id, x, y):
    """Derived (shuffle_seed, train_seed) for one pair; order-independent."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(int(tx_id), int(x), int(y)))
    a, b = ss.generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def _pair_result_from_features(feats_x, feats_y, split, config):
    parts_x, parts_y = split_indices(feats_x.shape[0], feats_y.shape[0], split)
    sets = []
    for ix, iy in zip(parts_x, parts_y):
        feats = np.concatenate([feats_x[ix], feats_y[iy]])
        labels = np.concatenate([np.zeros(len(ix), dtype=np.int64), np.ones(len(iy), dtype=np.int64)])
        sets.append((feats, labels))
    (tr_x, tr_y), (va_x, va_y), (te_x, te_y) = sets
    disc = _fit_logreg(tr_x, tr_y, va_x, va_y, config)
    pred = disc.predict_features(te_x)
    return int((pred == te_y).sum()), int(te_y.size)


def pair_delta(images_x, images_y, split, config=TrainConfig(), *, tx_id=0, pair=(1, 2)):
    """Full reference dissimilarity check for one measurement pair."""
    correct, total = _pair_result_from_features(
        pooled_features(_to_stack(images_x)), pooled_features(_to_stack(images_y)), split, config
    )
    return DissimilarityRecord(
        tx_id=tx_id,
        pair=tuple(pair),
        delta=correct / total,
        correct=correct,
        total=total,
        discriminator_id=REFERENCE_ID,
        seed=split.shuffle_seed,
    )


class PluginError(Exception):
    """An external discriminator invocation failed for one pair."""


@dataclass(frozen=True)
class ExternalDiscriminator:
    """Plug-in contract for external classifiers.

    The command is invoked once per pair with the path of a JSON job
    description as its last argument. The job lists train/val/test PNG paths
    with labels and a seed; the executable must print a single JSON object
    {"delta": ..., "correct": ..., "total": ...} on stdout. A nonzero exit
    status marks the entry as failed.
    """

    command: tuple
    discriminator_id: str = ""
    timeout: float | None = None

    def __post_init__(self):
        if not self.command:
            raise ValueError("plug-in command must be non-empty")
        object.__setattr__(self, "command", tuple(str(c) for c in self.command))
        if not self.discriminator_id:
            name = " ".join(Path(c).name for c in self.command)
            object.__setattr__(self, "discriminator_id", name)


def _write_plugin_job(job_dir, tx_id, pair, seed, sets):
    job_dir = Path(job_dir)
    job_dir.mkdir(parents=True, exist_ok=True)
    doc = {"schema_version": 1, "tx_id": tx_id, "pair": list(pair), "seed": seed}
    for name, labeled in zip(("train", "val", "test"), sets):
        rows = []
        for k in range(len(labeled)):
            png = job_dir / f"{name}_{k:04d}.png"
            export_png(TileImage(counts=labeled.images[k], extent=(-1, 1, -1, 1)), png)
            rows.append({"path": str(png), "label": int(labeled.labels[k])})
        doc[name] = rows
    job_path = job_dir / "job.json"
    job_path.write_text(json.dumps(doc, indent=1) + "\n")
    return job_path


def run_plugin_pair(plugin, images_x, images_y, split, *, tx_id, pair, workdir=None):
    """Invoke an external discriminator for one pair and parse its result."""
    tmp_root = tempfile.mkdtemp(prefix="rffkit-plugin-", dir=workdir)
    try:
        sets = split_images(images_x, images_y, split)
        job_path = _write_plugin_job(tmp_root, tx_id, pair, split.shuffle_seed, sets)
        try:
            proc = subprocess.run(
                [*plugin.command, str(job_path)],
                capture_output=True,
                text=True,
                timeout=plugin.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise PluginError(f"pair {pair}: {exc}") from exc
        if proc.returncode != 0:
            raise PluginError(
                f"pair {pair}: exit status {proc.returncode}: {proc.stderr.strip()}"
            )
        try:
            result = json.loads(proc.stdout)
            correct, total = int(result["correct"]), int(result["total"])
            delta = float(result["delta"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise PluginError(f"pair {pair}: bad plug-in output {proc.stdout!r}") from exc
        return DissimilarityRecord(
            tx_id=tx_id,
            pair=tuple(pair),
            delta=delta,
            correct=correct,
            total=total,
            discriminator_id=plugin.discriminator_id,
            seed=split.shuffle_seed,
        )
    finally:
        shutil.rmtree(tmp_root, ignore_errors=True)


# ---------------------------------------------------------------------------
# Full matrix computation

_WORKER_STATE = None


def _init_matrix_worker(features_by_meas, tx_id, split, config, master_seed):
    global _WORKER_STATE
    _WORKER_STATE = (features_by_meas, tx_id, split, config, master_seed)


def _matrix_pair_job(pair):
    features_by_meas, tx_id, split, config, master_seed = _WORKER_STATE
    return _compute_reference_pair(features_by_meas, tx_id, pair, split, config, master_seed)


def _compute_reference_pair(features_by_meas, tx_id, pair, split, config, master_seed):
    x, y = pair
    shuffle_seed, train_seed = pair_seeds(master_seed, tx_id, x, y)
    pair_split = replace(split, shuffle_seed=shuffle_seed)
    pair_config = replace(config, seed=train_seed)
    correct, total = _pair_result_from_features(
        features_by_meas[x], features_by_meas[y], pair_split, pair_config
    )
    return DissimilarityRecord(
        tx_id=tx_id,
        pair=(x, y),
        delta=correct / total,
        correct=correct,
        total=total,
        discriminator_id=REFERENCE_ID,
        seed=shuffle_seed,
    )


def _matrix_shell(keys, tx_id, existing):
    indices = sorted(keys)
    n = len(indices)
    if n < 2:
        raise ValueError("need at least 2 measurements")
    if indices != list(range(1, n + 1)):
        raise ValueError(f"measurement indices {indices} must be contiguous 1..{n}")
    matrix = existing if existing is not None else DissimilarityMatrix(tx_id, n)
    if matrix.tx_id != tx_id or matrix.n != n:
        raise ValueError("existing matrix does not match this transmitter")
    return matrix


def dissimilarity_matrix_from_features(
    features_by_meas,
    tx_id,
    split=SplitSpec(),
    config=TrainConfig(),
    *,
    master_seed=0,
    existing=None,
    workers=1,
    on_entry=None,
):
    """Reference-discriminator matrix over precomputed pooled features.

    `features_by_meas` maps measurement_index -> (n_images, 784) arrays from
    `pooled_features`. Per-pair seeds derive from (master_seed, tx_id, x, y),
    so results are identical across reruns, entry orderings, and worker
    counts; passing `existing` resumes, skipping computed entries.
    `on_entry(record)` fires as each entry lands (order not guaranteed under
    parallelism).
    """
    matrix = _matrix_shell(features_by_meas, tx_id, existing)
    jobs = matrix.missing_pairs()

    def land(record):
        matrix.add(record)
        if on_entry is not None:
            on_entry(record)

    if workers <= 1:
        for pair in jobs:
            land(_compute_reference_pair(features_by_meas, tx_id, pair, split, config, master_seed))
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_matrix_worker,
            initargs=(features_by_meas, tx_id, split, config, master_seed),
        ) as pool:
            for record in pool.map(_matrix_pair_job, jobs, chunksize=4):
                land(record)
    return matrix


def dissimilarity_matrix(
    images_by_meas,
    tx_id,
    split=SplitSpec(),
    config=TrainConfig(),
    *,
    master_seed=0,
    existing=None,
    workers=1,
    plugin=None,
    plugin_workdir=None,
    on_entry=None,
):
    """Compute delta once per unordered measurement pair of one transmitter.

    `images_by_meas` maps measurement_index -> (n_images, 224, 224) count
    stack. Symmetry is imposed by construction (each unordered pair is
    trained once). With `plugin` set, each pair is delegated to the external
    discriminator; plug-in failures are recorded per entry and leave the
    matrix incomplete. See dissimilarity_matrix_from_features for the
    determinism and resume contract.
    """
    if plugin is None:
        features_by_meas = {
            m: pooled_features(_to_stack(stack)) for m, stack in images_by_meas.items()
        }
        return dissimilarity_matrix_from_features(
            features_by_meas, tx_id, split, config,
            master_seed=master_seed, existing=existing, workers=workers, on_entry=on_entry,
        )

    matrix = _matrix_shell(images_by_meas, tx_id, existing)
    jobs = matrix.missing_pairs()
    stacks = {m: _to_stack(stack) for m, stack in images_by_meas.items()}

    def land(record):
        matrix.add(record)
        if on_entry is not None:
            on_entry(record)

    def run_one(pair):
        shuffle_seed, _ = pair_seeds(master_seed, tx_id, *pair)
        pair_split = replace(split, shuffle_seed=shuffle_seed)
        return run_plugin_pair(
            plugin, stacks[pair[0]], stacks[pair[1]], pair_split,
            tx_id=tx_id, pair=pair, workdir=plugin_workdir,
        )

    if workers <= 1:
        for pair in jobs:
            try:
                land(run_one(pair))
            except PluginError as exc:
                matrix.record_error(*pair, exc)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_one, pair): pair for pair in jobs}
            for fut, pair in futures.items():
                try:
                    land(fut.result())
                except PluginError as exc:
                    matrix.record_error(*pair, exc)
    return matrix


def matrix_pair_count(n):
    """Number of unordered measurement pairs, C(n, 2)."""
    return math.comb(n, 2)
