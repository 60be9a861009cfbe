"""Driving a per-frame linear scorer through the pooled losses.

A linear map plus per-frame softmax stands in for a frame-level classifier.
Full-batch momentum descent minimizes the summed pooled loss over clips of 30
frames, with everything seeded. The printout traces the loss for both loss
kinds on the same synthetic co-activation data.
"""

from spdpool import synth_coactivation, train_linear

ds = synth_coactivation(
    num_classes=2, channels=24, pairs_per_class=8, seq_len=40,
    sequences_per_class=50, noise_sigma=0.0, activation_prob=0.3, seed=11,
)
print(f"dataset: {len(ds)} sequences, {ds.num_classes} classes\n")

for loss in ("frob", "jbld"):
    res = train_linear(
        ds, loss=loss, lr=1e-4, momentum=0.9, iters=1500, clip_len=30,
        seed=11, init_scale=0.05,
    )
    tr = res.loss_trace
    marks = (0, 100, 500, 1000, 1500)
    path = "  ->  ".join(f"{tr[i]:9.3f}" for i in marks)
    print(f"{loss:5s}: iterations {marks}")
    print(f"       {path}")
    print(f"       final/initial ratio: {tr[-1] / tr[0]:.3f}\n")
