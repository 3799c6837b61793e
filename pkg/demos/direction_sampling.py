"""
Near-uniform directions on the sphere
=====================================

Slicing directions come from a Fibonacci lattice: latitudes step evenly
in z while longitudes advance by the golden angle, so any number of
points spreads evenly without clustering at the poles.  The mean of the
points measures the imbalance: for a perfectly symmetric set it is the
zero vector.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from planetomo import fibonacci_lattice, make_frame

for count in (100, 500, 2000):
    points = fibonacci_lattice(count)
    imbalance = np.linalg.norm(points.mean(axis=0))
    print(f"L={count:5d}  |mean direction| = {imbalance:.2e}")

# each direction carries an in-plane frame (u, v); the deterministic
# policy derives it from a fixed reference, the random policy spins it
frame = make_frame(np.array([0.0, 0.0, 1.0]))
print("frame for +z:  u =", frame.u, " v =", frame.v)

points = fibonacci_lattice(600)
fig = plt.figure(figsize=(5, 5))
ax = fig.add_subplot(projection="3d")
ax.scatter(points[:, 0], points[:, 1], points[:, 2], s=6, c=points[:, 2], cmap="viridis")
ax.set_box_aspect((1, 1, 1))
ax.set_title("600 lattice directions")
fig.savefig("direction_sampling.png", dpi=120)
print("wrote direction_sampling.png")
