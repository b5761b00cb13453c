"""Ground-truth-labeled synthetic corpora.

Simulates a BPSK-like transmitter whose hardware-impairment parameters (the
"fingerprint state") mutate probabilistically at each simulated FPGA-image
reload: a transmitter owns K latent states, stays in its current state with
probability `stay_prob` at every measurement boundary, and otherwise jumps
uniformly to one of the other K-1 states. Within a state, a small
per-measurement parameter jitter models partial transitions, so mutations
preserve features of the old state rather than redrawing i.i.d.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (
    CaptureInfo,
    CorpusManifest,
    IqTrace,
    MeasurementEntry,
    iq_payload,
    save_manifest,
    write_iq,
)

# Continuous impairment parameters, in chain-application order of relevance.
PARAM_FIELDS = (
    "dc_offset_i",
    "dc_offset_q",
    "gain_imbalance",
    "quad_skew_rad",
    "cfo_frac",
    "phase_rad",
    "nl3",
)

# Parameter-space displacement corresponding to one unit of state_separation.
# Magnitudes calibrated so that at state_separation=2.0 the reference
# discriminator saturates (delta >= 0.95) while the default jitter below stays
# invisible to it (delta ~ 0.5).
PARAM_SCALES = {
    "dc_offset_i": 0.05,
    "dc_offset_q": 0.05,
    "gain_imbalance": 0.04,
    "quad_skew_rad": 0.04,
    "cfo_frac": 1.5e-5,
    "phase_rad": 0.10,
    "nl3": 0.04,
}

# Most impairments leave no distribution-level trace in a constellation
# histogram of this BPSK-like chain: gain_imbalance only enters scaled by
# sin(quad_skew), a pure nl3 amplitude change is cancelled by the quantile
# extent normalization, and once the CFO sweep rotates arc starts across a
# measurement, phase_rad / quad_skew_rad / the cfo sign alias away too. The
# DC offsets (position of the ring center) always survive, so they must
# carry the guaranteed share of the separation between states.
ROBUST_FIELDS = ("dc_offset_i", "dc_offset_q")

# Within-state measurement-to-measurement jitter (1% of one separation unit).
DEFAULT_JITTER = {name: 0.01 * scale for name, scale in PARAM_SCALES.items()}

_MIN_UNIT_DISTANCE = 1.0  # rejection floor for pairwise state distance
_MAX_STATE_DRAWS = 1000


@dataclass(frozen=True)
class FingerprintState:
    """Latent impairment-parameter vector of a simulated transmitter.

    `latent_id` is the ground-truth cluster label; the remaining fields are
    the standard transceiver impairments known to drive RF fingerprints:
    additive DC bias, Q-branch gain ratio, quadrature skew, carrier frequency
    offset (fraction of sample rate), constant phase rotation, and a
    third-order nonlinearity coefficient.
    """

    latent_id: int
    dc_offset_i: float = 0.0
    dc_offset_q: float = 0.0
    gain_imbalance: float = 1.0
    quad_skew_rad: float = 0.0
    cfo_frac: float = 0.0
    phase_rad: float = 0.0
    nl3: float = 0.0

    def __post_init__(self):
        if self.latent_id < 0:
            raise ValueError("latent_id must be >= 0")
        vec = self.param_vector()
        if not np.all(np.isfinite(vec)):
            raise ValueError("fingerprint parameters must be finite")
        if not self.gain_imbalance > 0:
            raise ValueError("gain_imbalance must be positive")
        if not abs(self.cfo_frac) < 0.5:
            raise ValueError("cfo_frac must satisfy |cfo_frac| < 0.5")

    def param_vector(self):
        """Continuous parameters as a float array in PARAM_FIELDS order."""
        return np.array([getattr(self, name) for name in PARAM_FIELDS], dtype=float)


@dataclass(frozen=True)
class MutationModel:
    """Configuration of the latent-state mutation process and signal chain.

    The implied K-state transition kernel keeps the current state with
    probability `stay_prob` and redraws uniformly over the other K-1 states
    otherwise, so each row sums to 1. `snr_db` may be `inf` for a noiseless
    chain.
    """

    num_latent_states: int = 2
    stay_prob: float = 0.6
    jitter_sigma: dict = field(default_factory=lambda: dict(DEFAULT_JITTER))
    state_separation: float = 1.0
    snr_db: float = 25.0
    seed: int = 0

    def __post_init__(self):
        if self.num_latent_states < 1:
            raise ValueError("num_latent_states must be >= 1")
        if not 0.0 <= self.stay_prob <= 1.0:
            raise ValueError("stay_prob must lie in [0, 1]")
        if not self.state_separation > 0:
            raise ValueError("state_separation must be positive")
        unknown = set(self.jitter_sigma) - set(PARAM_FIELDS)
        if unknown:
            raise ValueError(f"unknown jitter_sigma keys: {sorted(unknown)}")
        for name, sigma in self.jitter_sigma.items():
            if not (np.isfinite(sigma) and sigma >= 0):
                raise ValueError(f"jitter_sigma[{name!r}] must be >= 0")

    def jitter_vector(self):
        return np.array(
            [self.jitter_sigma.get(name, 0.0) for name in PARAM_FIELDS], dtype=float
        )


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _draw_unit_directions(rng, k):
    # Signed magnitudes in [0.3, 1] keep every parameter involved in the
    # separation instead of letting a draw collapse onto a single axis.
    mags = rng.uniform(0.3, 1.0, size=(k, len(PARAM_FIELDS)))
    signs = rng.integers(0, 2, size=(k, len(PARAM_FIELDS))) * 2 - 1
    return mags * signs


def sample_state_set(model, rng_seed):
    """Draw the K latent fingerprint states of one transmitter.

    States are placed at `center + state_separation * PARAM_SCALES * u_k`
    with unit directions `u_k` redrawn until all pairwise distances (in
    scale-normalized space) clear a fixed floor, so pairwise parameter
    distance is proportional to `state_separation`. Deterministic given the
    seed.
    """
    k = model.num_latent_states
    rng = np.random.default_rng(_seed_sequence(rng_seed))
    robust = [PARAM_FIELDS.index(name) for name in ROBUST_FIELDS]
    for _ in range(_MAX_STATE_DRAWS):
        units = _draw_unit_directions(rng, k)
        vis = units[:, robust]
        dists = np.linalg.norm(vis[:, None, :] - vis[None, :, :], axis=-1)
        np.fill_diagonal(dists, np.inf)
        if k == 1 or dists.min() >= _MIN_UNIT_DISTANCE:
            break
    else:
        raise RuntimeError(f"could not place {k} states with enough separation")

    scales = np.array([PARAM_SCALES[name] for name in PARAM_FIELDS])
    center = FingerprintState(latent_id=0).param_vector()
    states = []
    for latent_id in range(k):
        params = center + model.state_separation * scales * units[latent_id]
        states.append(
            FingerprintState(latent_id=latent_id, **dict(zip(PARAM_FIELDS, params)))
        )
    return states


def mutate_state(current, model, rng):
    """Advance the latent-state chain across one simulated FPGA-image reload.

    Returns `current` with probability `stay_prob`, else a uniform draw over
    the other K-1 latent ids.
    """
    k = model.num_latent_states
    if not 0 <= current < k:
        raise ValueError(f"latent id {current} out of range for K={k}")
    if k == 1:
        return current
    if rng.random() < model.stay_prob:
        return current
    other = int(rng.integers(k - 1))
    return other if other < current else other + 1


def _jittered_params(state, model, rng):
    # One draw per parameter per measurement, even at sigma 0, so the stream
    # layout does not depend on which sigmas are zero.
    return state.param_vector() + rng.normal(0.0, model.jitter_vector())


def synth_measurement(state, model, n_samples, seed):
    """Generate one measurement's complex baseband samples.

    Random +/-1 BPSK symbols pass through, in order: third-order nonlinearity
    x + nl3*x^3, gain imbalance and quadrature skew on the Q branch, constant
    phase rotation, CFO rotation exp(j*2*pi*cfo_frac*n), additive DC offset,
    and AWGN at `snr_db` relative to the noiseless signal power. Within-state
    jitter perturbs a per-measurement copy of the parameters. The symbol,
    jitter, and noise streams are split from `seed`, so regenerating with
    `snr_db=inf` reproduces the identical noiseless signal.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sym_ss, jit_ss, noise_ss = _seed_sequence(seed).spawn(3)

    symbols = np.random.default_rng(sym_ss).integers(0, 2, n_samples) * 2.0 - 1.0
    p = dict(zip(PARAM_FIELDS, _jittered_params(state, model, np.random.default_rng(jit_ss))))

    i = symbols + p["nl3"] * symbols**3
    q = p["gain_imbalance"] * (i * np.sin(p["quad_skew_rad"]))  # skew leaks I into Q
    z = (i + 1j * q) * np.exp(1j * p["phase_rad"])
    z = z * np.exp(2j * np.pi * p["cfo_frac"] * np.arange(n_samples))
    z = z + (p["dc_offset_i"] + 1j * p["dc_offset_q"])

    if np.isfinite(model.snr_db):
        signal_power = np.mean(np.abs(z) ** 2)
        noise_power = signal_power * 10.0 ** (-model.snr_db / 10.0)
        g = np.random.default_rng(noise_ss).standard_normal((2, n_samples))
        z = z + np.sqrt(noise_power / 2.0) * (g[0] + 1j * g[1])
    return z


def measurement_seed(master_seed, transmitter_id, measurement_index):
    """Per-(transmitter, measurement) stream, independent of generation order."""
    return np.random.SeedSequence(master_seed, spawn_key=(transmitter_id, 2, measurement_index))


def state_set_seed(master_seed, transmitter_id):
    return np.random.SeedSequence(master_seed, spawn_key=(transmitter_id, 0))


def chain_seed(master_seed, transmitter_id):
    return np.random.SeedSequence(master_seed, spawn_key=(transmitter_id, 1))


def latent_chain(model, n_meas, transmitter_id):
    """Ground-truth latent-id sequence for one transmitter's measurements.

    The initial state is uniform over the K states; every later measurement
    boundary applies `mutate_state`. Deterministic given the model seed.
    """
    rng = np.random.default_rng(chain_seed(model.seed, transmitter_id))
    chain = [int(rng.integers(model.num_latent_states))]
    for _ in range(n_meas - 1):
        chain.append(mutate_state(chain[-1], model, rng))
    return chain


def synth_corpus(
    model,
    n_tx,
    n_meas,
    samples_per_meas,
    out_dir,
    sample_rate_hz=512_000.0,
    center_freq_hz=900e6,
):
    """Write a ground-truth-labeled synthetic corpus to `out_dir`.

    Each of the `n_tx` transmitters gets an independent latent state set and
    mutation chain; every measurement boundary triggers a mutation draw.
    Produces `manifest.json`, one raw I-Q file per measurement, and a
    `ground_truth.json` sidecar mapping (transmitter_id, measurement_index)
    to latent_id. Bit-identical output for identical (model, seed).

    Returns (CorpusManifest, labels) where labels is the sidecar list.
    """
    if n_tx < 1 or n_meas < 1 or samples_per_meas < 1:
        raise ValueError("n_tx, n_meas, and samples_per_meas must all be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    transmitters = {}
    labels = []
    for tx_id in range(1, n_tx + 1):
        states = sample_state_set(model, state_set_seed(model.seed, tx_id))
        chain = latent_chain(model, n_meas, tx_id)
        tx_dir = out_dir / f"tx{tx_id:02d}"
        tx_dir.mkdir(exist_ok=True)

        entries = []
        for m, latent_id in zip(range(1, n_meas + 1), chain):
            samples = synth_measurement(
                states[latent_id], model, samples_per_meas, measurement_seed(model.seed, tx_id, m)
            )
            trace = IqTrace(
                samples=samples,
                sample_rate_hz=sample_rate_hz,
                center_freq_hz=center_freq_hz,
                transmitter_id=tx_id,
                measurement_index=m,
            )
            rel_path = f"tx{tx_id:02d}/m{m:03d}.iq"
            write_iq(trace, out_dir / rel_path)
            checksum = zlib.crc32(iq_payload(trace.samples))
            entries.append(
                MeasurementEntry(
                    measurement_index=m,
                    path=rel_path,
                    sample_count=samples_per_meas,
                    checksum=checksum,
                )
            )
            labels.append(
                {
                    "transmitter_id": tx_id,
                    "measurement_index": m,
                    "latent_id": latent_id,
                }
            )
        transmitters[tx_id] = entries

    manifest = CorpusManifest(
        capture=CaptureInfo(
            sample_rate_hz=sample_rate_hz,
            center_freq_hz=center_freq_hz,
            notes={"source": "rffkit.synth", "master_seed": str(model.seed)},
        ),
        transmitters=transmitters,
    )
    save_manifest(manifest, out_dir / "manifest.json")
    (out_dir / "ground_truth.json").write_text(json.dumps(labels, indent=2) + "\n")
    return manifest, labels


def load_ground_truth(path):
    """Read a ground-truth sidecar into {(transmitter_id, measurement_index): latent_id}."""
    rows = json.loads(Path(path).read_text())
    return {
        (int(r["transmitter_id"]), int(r["measurement_index"])): int(r["latent_id"])
        for r in rows
    }
