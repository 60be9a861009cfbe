"""Verifying the pooled-loss gradients with central finite differences.

Both losses regress the scaled cross-product of a score matrix onto a
diagonal SPD label encoding. The analytic gradients are checked entrywise
against (f(T + hE) - f(T - hE)) / 2h; the report carries the worst relative
error. Note the squared-Frobenius gradient constant 4/n: the squared norm
contributes one factor of two and the symmetric product another.
"""

import numpy as np

from spdpool import encode_label, fd_gradient, frob_loss, jbld_loss

rng = np.random.default_rng(5)

for loss_kind, eps in (("jbld", 1e-5), ("frob", 0.0)):
    print(f"== {loss_kind} loss (label smoothing epsilon = {eps:g})")
    for M, n in ((2, 8), (3, 30), (5, 30)):
        T = rng.standard_normal((M, n))
        Y = encode_label(int(rng.integers(1, M + 1)), M, eps)
        value = jbld_loss(T, Y) if loss_kind == "jbld" else frob_loss(T, Y)
        report = fd_gradient(loss_kind, T, Y, h=1e-6)
        print(
            f"  M={M} n={n:2d}: loss {value:9.4f}, "
            f"max relative gradient error {report.max_relative_error:.2e} "
            f"(step {report.step:g})"
        )
    print()

print("Central differences are second order: shrinking the step by 10x cuts")
print("the truncation error by ~100x:")
T, Y = np.array([[0.2]]), np.array([[0.5]])
for h in (1e-3, 1e-4):
    err = fd_gradient("frob", T, Y, h=h).max_relative_error
    print(f"  h={h:g}: error {err:.3e}")
