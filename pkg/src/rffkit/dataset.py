"""Measurement corpus data model and on-disk persistence.

A corpus is a directory holding one JSON manifest plus one raw I-Q file per
measurement. Raw files are headerless interleaved little-endian float32
(I then Q), the de-facto SDR recording convention, so recordings from real
receivers can be dropped in without conversion. All metadata lives in the
manifest.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANIFEST_SCHEMA_VERSION = 1

# on-disk sample layout: interleaved little-endian float32 I,Q
_IQ_DTYPE = np.dtype("<f4")
_BYTES_PER_SAMPLE = 8


class DatasetError(Exception):
    """Base class for corpus and trace errors."""


class PersistenceError(DatasetError):
    """I/O failure while reading or writing a trace file."""

    def __init__(self, path, cause):
        super().__init__(f"I/O failure on {path}: {cause}")
        self.path = Path(path)


class SampleValidationError(DatasetError):
    """Trace samples violate an invariant (non-finite values, empty, ...)."""


class CorpusValidationError(DatasetError):
    """A manifest entry failed validation. Names the offending entry."""

    def __init__(self, message, transmitter_id=None, measurement_index=None):
        super().__init__(message)
        self.transmitter_id = transmitter_id
        self.measurement_index = measurement_index


class MissingTraceError(CorpusValidationError):
    """A file referenced by the manifest does not exist."""


class SizeMismatchError(CorpusValidationError):
    """File byte length disagrees with the declared sample count."""


class ChecksumMismatchError(CorpusValidationError):
    """CRC-32 of the raw file bytes disagrees with the manifest."""


class IndexGapError(CorpusValidationError):
    """Measurement indices of one transmitter are not a contiguous 1..M run."""


class DuplicateEntryError(CorpusValidationError):
    """Two manifest entries share the same (transmitter, measurement) key."""


@dataclass(frozen=True)
class IqTrace:
    """One measurement: complex baseband samples plus capture metadata.

    Parameters
    ----------
    samples : ndarray of complex
        Dimensionless baseband amplitudes. Stored as complex64 so that
        write/read round-trips are bit-exact against the float32 file format.
    sample_rate_hz, center_freq_hz : float
        Capture parameters, both strictly positive.
    transmitter_id : int
        Small non-negative transmitter label.
    measurement_index : int
        1-based position in the reload-interleaved measurement sequence.
    """

    samples: np.ndarray
    sample_rate_hz: float
    center_freq_hz: float
    transmitter_id: int
    measurement_index: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.complex64)
        if samples.ndim != 1 or samples.size < 1:
            raise SampleValidationError("trace needs at least one sample")
        if not np.all(np.isfinite(samples.view(np.float32))):
            raise SampleValidationError("trace contains non-finite samples")
        object.__setattr__(self, "samples", samples)
        if not (self.sample_rate_hz > 0 and np.isfinite(self.sample_rate_hz)):
            raise SampleValidationError("sample_rate_hz must be positive")
        if not (self.center_freq_hz > 0 and np.isfinite(self.center_freq_hz)):
            raise SampleValidationError("center_freq_hz must be positive")
        if self.transmitter_id < 0:
            raise SampleValidationError("transmitter_id must be >= 0")
        if self.measurement_index < 1:
            raise SampleValidationError("measurement_index must be >= 1")

    def __len__(self):
        return int(self.samples.size)


@dataclass(frozen=True)
class MeasurementEntry:
    """Manifest descriptor for one trace file."""

    measurement_index: int
    path: str  # relative to the manifest directory
    sample_count: int
    checksum: int  # CRC-32 of the raw file bytes


@dataclass(frozen=True)
class CaptureInfo:
    sample_rate_hz: float
    center_freq_hz: float
    notes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CorpusManifest:
    """Validated description of a corpus: per-transmitter measurement lists."""

    capture: CaptureInfo
    transmitters: dict  # transmitter_id -> list[MeasurementEntry], index-sorted

    def entry_count(self):
        return sum(len(v) for v in self.transmitters.values())

    def to_json_dict(self):
        return {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "capture": {
                "sample_rate_hz": self.capture.sample_rate_hz,
                "center_freq_hz": self.capture.center_freq_hz,
                "notes": dict(self.capture.notes),
            },
            "transmitters": [
                {
                    "transmitter_id": tx_id,
                    "measurements": [
                        {
                            "measurement_index": e.measurement_index,
                            "path": e.path,
                            "sample_count": e.sample_count,
                            "checksum": e.checksum,
                        }
                        for e in entries
                    ],
                }
                for tx_id, entries in sorted(self.transmitters.items())
            ],
        }


def iq_payload(samples):
    """Samples as the on-disk byte layout (little-endian float32 I,Q pairs)."""
    return np.ascontiguousarray(samples, dtype="<c8").view(_IQ_DTYPE).tobytes()


def write_iq(trace, path):
    """Write a trace as headerless interleaved little-endian float32 I,Q.

    The file holds 8 bytes per complex sample and no metadata; pair it with a
    manifest entry. Raises PersistenceError on I/O failure.
    """
    path = Path(path)
    try:
        path.write_bytes(iq_payload(trace.samples))
    except OSError as exc:
        raise PersistenceError(path, exc) from exc


def read_iq(path, expected_count):
    """Read exactly `expected_count` complex samples written by write_iq.

    Returns a complex64 array; round-trips write_iq bit-exactly. Raises
    SizeMismatchError if the file length disagrees with `expected_count`
    and SampleValidationError if any component is non-finite.
    """
    path = Path(path)
    try:
        size = path.stat().st_size
        if size != expected_count * _BYTES_PER_SAMPLE:
            raise SizeMismatchError(
                f"{path}: expected {expected_count * _BYTES_PER_SAMPLE} bytes "
                f"({expected_count} samples), found {size}"
            )
        raw = np.fromfile(path, dtype=_IQ_DTYPE)
    except OSError as exc:
        raise PersistenceError(path, exc) from exc
    if not np.all(np.isfinite(raw)):
        raise SampleValidationError(f"{path}: non-finite sample values")
    return raw.view(np.complex64)


def crc32_of_file(path):
    """CRC-32 of the raw file bytes (cheap corruption detection)."""
    crc = 0
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                return crc
            crc = zlib.crc32(chunk, crc)


class Corpus:
    """Immutable, validated corpus: manifest plus lazy trace access."""

    def __init__(self, manifest, root):
        self.manifest = manifest
        self.root = Path(root)

    @property
    def transmitter_ids(self):
        return sorted(self.manifest.transmitters)

    def measurement_indices(self, transmitter_id):
        return [e.measurement_index for e in self.manifest.transmitters[transmitter_id]]

    def entry(self, transmitter_id, measurement_index):
        for e in self.manifest.transmitters[transmitter_id]:
            if e.measurement_index == measurement_index:
                return e
        raise KeyError((transmitter_id, measurement_index))

    def trace(self, transmitter_id, measurement_index):
        e = self.entry(transmitter_id, measurement_index)
        samples = read_iq(self.root / e.path, e.sample_count)
        return IqTrace(
            samples=samples,
            sample_rate_hz=self.manifest.capture.sample_rate_hz,
            center_freq_hz=self.manifest.capture.center_freq_hz,
            transmitter_id=transmitter_id,
            measurement_index=measurement_index,
        )

    def __len__(self):
        return self.manifest.entry_count()


def _parse_manifest(doc):
    if not isinstance(doc, dict):
        raise CorpusValidationError("manifest must be a JSON object")
    if doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise CorpusValidationError(
            f"unsupported schema_version {doc.get('schema_version')!r} "
            f"(expected {MANIFEST_SCHEMA_VERSION})"
        )
    cap = doc.get("capture", {})
    capture = CaptureInfo(
        sample_rate_hz=float(cap["sample_rate_hz"]),
        center_freq_hz=float(cap["center_freq_hz"]),
        notes=dict(cap.get("notes", {})),
    )
    transmitters = {}
    for block in doc.get("transmitters", []):
        tx_id = int(block["transmitter_id"])
        if tx_id in transmitters:
            raise DuplicateEntryError(
                f"transmitter {tx_id} listed twice", transmitter_id=tx_id
            )
        entries = []
        for m in block.get("measurements", []):
            entries.append(
                MeasurementEntry(
                    measurement_index=int(m["measurement_index"]),
                    path=str(m["path"]),
                    sample_count=int(m["sample_count"]),
                    checksum=int(m["checksum"]),
                )
            )
        transmitters[tx_id] = entries
    return CorpusManifest(capture=capture, transmitters=transmitters)


def load_corpus(manifest_path):
    """Load and fully validate a corpus from its manifest.

    Checks, per transmitter: no duplicate measurement indices, indices form a
    contiguous 1..M run, every referenced file exists and matches both its
    declared sample count (byte length) and CRC-32 checksum. Each failure
    raises a distinct CorpusValidationError subclass naming the entry.
    """
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise PersistenceError(manifest_path, exc) from exc
    except json.JSONDecodeError as exc:
        raise CorpusValidationError(f"{manifest_path}: invalid JSON ({exc})") from exc

    manifest = _parse_manifest(doc)
    root = manifest_path.parent

    validated = {}
    for tx_id, entries in manifest.transmitters.items():
        indices = [e.measurement_index for e in entries]
        seen = set()
        for ix in indices:
            if ix in seen:
                raise DuplicateEntryError(
                    f"transmitter {tx_id}: duplicate measurement_index {ix}",
                    transmitter_id=tx_id,
                    measurement_index=ix,
                )
            seen.add(ix)
        if sorted(indices) != list(range(1, len(indices) + 1)):
            raise IndexGapError(
                f"transmitter {tx_id}: measurement indices {sorted(indices)} "
                f"are not contiguous 1..{len(indices)}",
                transmitter_id=tx_id,
            )
        for e in entries:
            fp = root / e.path
            if not fp.is_file():
                raise MissingTraceError(
                    f"transmitter {tx_id} measurement {e.measurement_index}: "
                    f"missing file {fp}",
                    transmitter_id=tx_id,
                    measurement_index=e.measurement_index,
                )
            size = fp.stat().st_size
            if size != e.sample_count * _BYTES_PER_SAMPLE:
                raise SizeMismatchError(
                    f"transmitter {tx_id} measurement {e.measurement_index}: "
                    f"{fp} has {size} bytes, expected "
                    f"{e.sample_count * _BYTES_PER_SAMPLE}",
                    transmitter_id=tx_id,
                    measurement_index=e.measurement_index,
                )
            crc = crc32_of_file(fp)
            if crc != e.checksum:
                raise ChecksumMismatchError(
                    f"transmitter {tx_id} measurement {e.measurement_index}: "
                    f"checksum {crc:#010x} != manifest {e.checksum:#010x}",
                    transmitter_id=tx_id,
                    measurement_index=e.measurement_index,
                )
        validated[tx_id] = sorted(entries, key=lambda e: e.measurement_index)

    return Corpus(CorpusManifest(capture=manifest.capture, transmitters=validated), root)


def save_manifest(manifest, manifest_path):
    """Write a manifest as a single JSON document (schema_version included)."""
    manifest_path = Path(manifest_path)
    manifest_path.write_text(json.dumps(manifest.to_json_dict(), indent=2) + "\n")
