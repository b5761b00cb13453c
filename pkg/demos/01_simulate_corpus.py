"""
Simulating a fingerprint-mutation corpus
========================================

A transmitter's RF fingerprint is modeled as a latent impairment state that
mutates probabilistically every time a new measurement starts. This script
builds a small ground-truth-labeled corpus and pokes at what got written.
"""

import json
import tempfile
from pathlib import Path

from rffkit.dataset import load_corpus
from rffkit.synth import MutationModel, latent_chain, sample_state_set, synth_corpus

out_dir = Path(tempfile.mkdtemp(prefix="rffkit-demo-")) / "corpus"

# Two latent states per transmitter; at each measurement boundary the state
# survives with probability 0.6, otherwise it jumps to the other one.
model = MutationModel(num_latent_states=2, stay_prob=0.6, state_separation=2.0, seed=42)

# The states themselves are impairment-parameter vectors (DC offset, IQ
# imbalance, quadrature skew, CFO, phase, nonlinearity):
for state in sample_state_set(model, 0):
    print(f"state {state.latent_id}: dc=({state.dc_offset_i:+.4f}, {state.dc_offset_q:+.4f}) "
          f"gain={state.gain_imbalance:.4f} cfo={state.cfo_frac:+.2e}")

# The ground-truth chain for transmitter 1, before any signal is generated:
print("latent chain tx1:", latent_chain(model, 25, 1))

# Write a 3-transmitter corpus: raw I-Q files + JSON manifest + sidecar.
manifest, labels = synth_corpus(model, n_tx=3, n_meas=10, samples_per_meas=20_000, out_dir=out_dir)
print(f"wrote {manifest.entry_count()} measurements under {out_dir}")

# The manifest is a single JSON document with checksums for every file:
doc = json.loads((out_dir / "manifest.json").read_text())
print("schema_version:", doc["schema_version"])
print("first entry:", doc["transmitters"][0]["measurements"][0])

# load_corpus re-validates everything (existence, sizes, CRC-32, contiguity)
corpus = load_corpus(out_dir / "manifest.json")
trace = corpus.trace(1, 1)
print(f"trace (1,1): {len(trace)} samples at {trace.sample_rate_hz/1e3:.0f} kS/s")

# The sidecar maps every measurement to its ground-truth latent state, which
# is what the end-to-end analytics are scored against.
rows = json.loads((out_dir / "ground_truth.json").read_text())
print("ground truth for tx1:", [r["latent_id"] for r in rows if r["transmitter_id"] == 1])
