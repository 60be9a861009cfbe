"""Why second-order pooling sees what frame means cannot.

Two classes of synthetic sequences share identical per-channel activation
rates; they differ only in WHICH channels fire together within a frame. The
demo prints the per-channel means (indistinguishable) and then the
cross-product and RBF pooled descriptors, where the coupled pair stands out.
"""

import numpy as np

from spdpool import synth_coactivation, tcp, kcp
from spdpool.trajectory import coactivation_pairs

np.set_printoptions(precision=2, suppress=True, linewidth=120)

ds = synth_coactivation(
    num_classes=2, channels=6, pairs_per_class=1, seq_len=4000,
    sequences_per_class=1, noise_sigma=0.0, activation_prob=0.4, seed=42,
)
pairs = coactivation_pairs(2, 1, 6, seed=42)
print("coupled channel pair per class:", {c + 1: pairs[c] for c in range(2)})

for rec in ds.records:
    t = rec.trajectory
    print(f"\nclass {rec.label}: per-channel means (first-order view)")
    print(" ", t.values.mean(axis=1))

print("\nThe means match across classes by construction. Now the second-order view:")
for rec in ds.records:
    print(f"\nclass {rec.label}: cross-product pooling T T^T / n")
    print(tcp(rec.trajectory, scale="by_n").values)

print(
    "\nEntries at the coupled pair sit near the activation rate (the channels"
    "\nmove together); uncoupled entries sit near its square."
)

for rec in ds.records:
    K = kcp(rec.trajectory, 1.0)
    print(f"\nclass {rec.label}: RBF-similarity pooling (diagonal = frame count)")
    print(K.values)
