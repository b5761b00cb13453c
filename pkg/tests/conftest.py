import numpy as np
import pytest

from rffkit.dataset import (
    CaptureInfo,
    CorpusManifest,
    IqTrace,
    MeasurementEntry,
    crc32_of_file,
    save_manifest,
    write_iq,
)


def random_trace(rng, n_samples=64, tx_id=1, measurement_index=1):
    samples = (
        rng.standard_normal(n_samples).astype(np.float32)
        + 1j * rng.standard_normal(n_samples).astype(np.float32)
    ).astype(np.complex64)
    return IqTrace(
        samples=samples,
        sample_rate_hz=512_000.0,
        center_freq_hz=900e6,
        transmitter_id=tx_id,
        measurement_index=measurement_index,
    )


def build_corpus(root, layout, n_samples=64, seed=0):
    """Write a small valid corpus: layout maps transmitter_id -> measurement count."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    transmitters = {}
    for tx_id, n_meas in layout.items():
        entries = []
        for m in range(1, n_meas + 1):
            trace = random_trace(rng, n_samples, tx_id, m)
            rel = f"tx{tx_id:02d}_m{m:03d}.iq"
            write_iq(trace, root / rel)
            entries.append(
                MeasurementEntry(
                    measurement_index=m,
                    path=rel,
                    sample_count=n_samples,
                    checksum=crc32_of_file(root / rel),
                )
            )
        transmitters[tx_id] = entries
    manifest = CorpusManifest(
        capture=CaptureInfo(sample_rate_hz=512_000.0, center_freq_hz=900e6, notes={}),
        transmitters=transmitters,
    )
    save_manifest(manifest, root / "manifest.json")
    return root / "manifest.json"


def random_count_images(rng, n_images, peak=50):
    """Small stack of sparse 224x224 count grids for discriminator tests."""
    stack = np.zeros((n_images, 224, 224), dtype=np.int64)
    for i in range(n_images):
        rows = rng.integers(0, 224, size=40)
        cols = rng.integers(0, 224, size=40)
        np.add.at(stack[i], (rows, cols), rng.integers(1, peak, size=40))
    return stack


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
