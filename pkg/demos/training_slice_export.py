"""
Exporting randomized training slices
====================================

Training the classifier behind an external evaluator needs 2D slices
drawn from the volumes at random orientations, with the augmentations
applied at sampling time: per-slice axis scaling, in-plane translation,
and an affine intensity jitter.  One stack per volume keeps slices of a
volume mutually consistent while directions vary across volumes.
"""

import json

from planetomo import sample_training_stacks, two_ellipsoids
from planetomo.slicing import save_training_slices

vol = two_ellipsoids((32, 32, 32))
slices, metadata = sample_training_stacks(
    vol, stack_count=2, slices_per_stack=6, h_s=64, w_s=64, seed=3
)
print(f"{len(slices)} slices of {slices[0].data.shape}")

# every slice records how it was cut, so the export is self-describing
entry = metadata[0]
print("first slice metadata:")
print(json.dumps({k: entry[k] for k in ("stack", "slice", "s", "n")}, indent=1))

save_training_slices(slices, metadata, "training_slices")
print("wrote training_slices.bin / training_slices.json")
