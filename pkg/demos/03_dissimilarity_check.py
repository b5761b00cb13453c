"""
The dissimilarity check D(Mx, My)
=================================

Two measurements are compared by training a binary classifier to tell their
images apart: held-out test accuracy is the dissimilarity index delta.
delta ~ 0.5 means the classifier failed, i.e. the fingerprint is the same;
delta ~ 1 means the fingerprint changed between the measurements.
"""

from rffkit.discriminator import SplitSpec, TrainConfig, evaluate_delta, pair_delta, reference_train, split_images
from rffkit.imaging import image_stack, segment_measurement
from rffkit.synth import MutationModel, sample_state_set, synth_measurement

SAMPLES_PER_IMAGE = 10_000
N_IMAGES = 100


def measurement_images(state, model, seed):
    z = synth_measurement(state, model, SAMPLES_PER_IMAGE * N_IMAGES, seed)
    return image_stack(segment_measurement(z, SAMPLES_PER_IMAGE, N_IMAGES))


model = MutationModel(num_latent_states=2, state_separation=2.0, seed=5)
state_a, state_b = sample_state_set(model, 0)

# Case 1: both measurements from the same latent state (only jitter and
# noise differ). The classifier should be reduced to coin flipping.
same_x = measurement_images(state_a, model, 10)
same_y = measurement_images(state_a, model, 11)
rec = pair_delta(same_x, same_y, SplitSpec(shuffle_seed=1), TrainConfig())
print(f"same fingerprint:    delta = {rec.delta:.3f} ({rec.correct}/{rec.total} test images)")

# Case 2: the fingerprint mutated between the measurements.
diff_y = measurement_images(state_b, model, 12)
rec = pair_delta(same_x, diff_y, SplitSpec(shuffle_seed=1), TrainConfig())
print(f"mutated fingerprint: delta = {rec.delta:.3f} ({rec.correct}/{rec.total} test images)")

# Under the hood: a seeded 0.6/0.2/0.2 split, a pooled-logistic-regression
# fit with best-validation-epoch selection, and accuracy on the test set.
train, val, test = split_images(same_x, diff_y, SplitSpec(shuffle_seed=1))
print(f"split sizes: train={len(train)} val={len(val)} test={len(test)}")
disc = reference_train(train, val, TrainConfig())
print(f"best epoch {disc.best_epoch}, val accuracy {disc.val_accuracy:.3f}, "
      f"test delta {evaluate_delta(disc, test):.3f}")

# delta granularity is 1/|test|: with 40 test images every value is a
# multiple of 0.025, which makes the exact 1.0 / 0.5 region endpoints
# meaningful.
print("granularity:", 1 / len(test))
