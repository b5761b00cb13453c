"""
Plugging in an external discriminator
=====================================

The reference pooled-logistic-regression can be replaced by any external
classifier (a CNN, a remote service, ...) via the plug-in contract: the
toolkit invokes a command once per measurement pair with a JSON job file
listing train/val/test PNG paths and labels; the command prints a single
JSON result {"delta": ..., "correct": ..., "total": ...}.
"""

import stat
import tempfile
from pathlib import Path

import numpy as np

from rffkit.discriminator import ExternalDiscriminator, dissimilarity_matrix
from rffkit.imaging import image_stack, segment_measurement
from rffkit.synth import MutationModel, sample_state_set, synth_measurement

root = Path(tempfile.mkdtemp(prefix="rffkit-demo-"))

# A toy external discriminator: "classify" each test image by its mean
# pixel after decoding the PNG, thresholded at the train-set midpoint.
PLUGIN = '''#!/usr/bin/env python3
import json, sys
import numpy as np
from PIL import Image

job = json.load(open(sys.argv[1]))
def mean_pixel(row):
    return float(np.asarray(Image.open(row["path"])).mean())

centers = {}
for label in (0, 1):
    vals = [mean_pixel(r) for r in job["train"] if r["label"] == label]
    centers[label] = sum(vals) / len(vals)

correct = 0
for row in job["test"]:
    pred = min((0, 1), key=lambda lab: abs(mean_pixel(row) - centers[lab]))
    correct += int(pred == row["label"])
total = len(job["test"])
print(json.dumps({"delta": correct / total, "correct": correct, "total": total}))
'''
plugin_path = root / "mean_pixel_plugin.py"
plugin_path.write_text(PLUGIN)
plugin_path.chmod(plugin_path.stat().st_mode | stat.S_IEXEC)

# Small two-measurement corpus from two well-separated states.
model = MutationModel(num_latent_states=2, state_separation=2.0, seed=9)
state_a, state_b = sample_state_set(model, 0)
images = {}
for m, state in ((1, state_a), (2, state_b)):
    z = synth_measurement(state, model, 2000 * 30, seed=m)
    images[m] = image_stack(segment_measurement(z, 2000, 30))

plugin = ExternalDiscriminator(command=("python3", str(plugin_path)))
matrix = dissimilarity_matrix(images, tx_id=1, plugin=plugin, plugin_workdir=root)

rec = matrix.record(1, 2)
print(f"plug-in '{rec.discriminator_id}' returned delta={rec.delta:.3f} "
      f"({rec.correct}/{rec.total})")
print("matrix complete:", matrix.complete)

# Failures are tracked per entry instead of aborting the whole matrix: a
# nonzero exit status leaves the pair marked and the matrix incomplete.
broken = ExternalDiscriminator(command=("false",))
matrix2 = dissimilarity_matrix(images, tx_id=1, plugin=broken, plugin_workdir=root)
print("broken plug-in -> complete:", matrix2.complete, "| errors:", len(matrix2.errors))
