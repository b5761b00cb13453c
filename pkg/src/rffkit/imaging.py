"""I-Q segments to 224x224 bivariate-histogram tile images.

Each tile counts how many I-Q samples fall in its region of the complex
plane; the count grid is the classifier input representation. Rendering to
grayscale PNG is for inspection and external classifier plug-ins only — the
reference discriminator consumes raw counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

GRID = 224


@dataclass(frozen=True)
class TileImage:
    """One histogram tile grid.

    `counts[r][c]` is indexed with the top row at maximum Q (image
    convention); `extent` is (i_min, i_max, q_min, q_max); `source`
    identifies (transmitter_id, measurement_index, segment_index).
    """

    counts: np.ndarray
    extent: tuple
    source: tuple = (0, 0, 0)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (GRID, GRID):
            raise ValueError(f"count grid must be {GRID}x{GRID}, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts.astype(np.int64))
        i_min, i_max, q_min, q_max = self.extent
        if not (i_max > i_min and q_max > q_min):
            raise ValueError(f"extent {self.extent} has no area")


def _check_extent(extent):
    i_min, i_max, q_min, q_max = (float(v) for v in extent)
    if not all(np.isfinite([i_min, i_max, q_min, q_max])):
        raise ValueError(f"extent {extent} is not finite")
    if i_max <= i_min or q_max <= q_min:
        raise ValueError(f"extent {extent} has no area")
    return i_min, i_max, q_min, q_max


def _axis_bins(values, lo, hi):
    # Uniform 224-way partition, left-closed/right-open; a value exactly on
    # the max edge belongs to the last bin.
    raw = (values - lo) / (hi - lo) * GRID
    return np.minimum(np.floor(raw).astype(np.int64), GRID - 1)


def iq_to_image(segment, extent, source=(0, 0, 0)):
    """Bin one I-Q segment into a TileImage.

    Samples outside the extent are dropped, so the count sum may fall short
    of the segment length. Row 0 holds the maximum-Q stripe.
    """
    segment = np.asarray(segment)
    if segment.size == 0:
        raise ValueError("segment must be non-empty")
    i_min, i_max, q_min, q_max = _check_extent(extent)

    i = segment.real.astype(np.float64)
    q = segment.imag.astype(np.float64)
    keep = (i >= i_min) & (i <= i_max) & (q >= q_min) & (q <= q_max)
    cols = _axis_bins(i[keep], i_min, i_max)
    rows = (GRID - 1) - _axis_bins(q[keep], q_min, q_max)

    counts = np.bincount(rows * GRID + cols, minlength=GRID * GRID).reshape(GRID, GRID)
    return TileImage(counts=counts, extent=(i_min, i_max, q_min, q_max), source=tuple(source))


def measurement_extent(samples, quantile=0.999):
    """Symmetric histogram window [-a, a]^2 for one measurement.

    `a` is the given quantile of max(|I|, |Q|) over the measurement — robust
    to outliers while keeping the constellation filling the frame.
    """
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("cannot compute an extent from zero samples")
    a = float(np.quantile(np.maximum(np.abs(samples.real), np.abs(samples.imag)), quantile))
    if not (np.isfinite(a) and a > 0):
        raise ValueError(f"degenerate extent half-width {a}")
    return (-a, a, -a, a)


def segment_measurement(
    samples,
    samples_per_image,
    n_images,
    *,
    transmitter_id=0,
    measurement_index=0,
    extent=None,
    extent_quantile=0.999,
):
    """Cut a measurement into consecutive non-overlapping tile images.

    All images of the measurement share one extent (computed once from the
    full sample array unless given). Raises ValueError when the trace is too
    short, reporting required vs available.
    """
    samples = np.asarray(samples)
    needed = samples_per_image * n_images
    if samples_per_image < 1 or n_images < 1:
        raise ValueError("samples_per_image and n_images must be >= 1")
    if samples.size < needed:
        raise ValueError(
            f"measurement has {samples.size} samples, "
            f"{needed} required for {n_images} images of {samples_per_image}"
        )
    if extent is None:
        extent = measurement_extent(samples, extent_quantile)

    images = []
    for seg in range(n_images):
        chunk = samples[seg * samples_per_image : (seg + 1) * samples_per_image]
        images.append(
            iq_to_image(chunk, extent, source=(transmitter_id, measurement_index, seg))
        )
    return images


def image_stack(images):
    """Stack TileImages into an (n, 224, 224) count array."""
    return np.stack([img.counts for img in images])


def to_grayscale(image):
    """8-bit pixels: round(255 * log1p(count) / log1p(max_count))."""
    counts = image.counts
    max_count = counts.max()
    if max_count == 0:
        return np.zeros((GRID, GRID), dtype=np.uint8)
    pixels = np.rint(255.0 * np.log1p(counts) / np.log1p(max_count))
    return pixels.astype(np.uint8)


def export_png(image, path):
    """Write the log-normalized grayscale rendering as an 8-bit PNG."""
    Image.fromarray(to_grayscale(image), mode="L").save(path, format="PNG")


def export_csv(image, path):
    """Dump the raw count grid row-major, 224 comma-separated values per line."""
    np.savetxt(path, image.counts, fmt="%d", delimiter=",")
