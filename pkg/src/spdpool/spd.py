"""Numerics on the manifold of symmetric positive definite matrices.

Provides the symmetric eigendecomposition (cyclic Jacobi), the matrix
logarithm, two dissimilarities and their kernels (log-Euclidean metric and
Jensen-Bregman log-det divergence / Stein kernel), kernel combination,
log-domain vectorization, ridge regularization, and Gram-matrix construction
over descriptor collections.

All functions accept either plain symmetric ndarrays or descriptor objects
exposing `.values` / `.blocks`; block descriptors are treated as their
block-diagonal embedding (distances add across blocks).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .pooling import BlockDescriptor, SpdDescriptor

GRM_MAGIC = b"GRM1"


def _as_matrix(C) -> np.ndarray:
    if isinstance(C, SpdDescriptor):
        return C.values
    return np.asarray(C, dtype=float)


def _blocks_of(C) -> list[np.ndarray]:
    if isinstance(C, BlockDescriptor):
        return [b.values for b in C.blocks]
    return [_as_matrix(C)]


def _like(C, values: np.ndarray):
    if isinstance(C, SpdDescriptor):
        return SpdDescriptor(values, n_frames=C.n_frames)
    return values


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix: descending eigenvalues and
    an orthonormal matrix whose columns are the matching eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(C, max_sweeps: int = 64) -> SymEig:
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Sweeps rotate every off-diagonal pair until the off-diagonal Frobenius
    norm falls below 1e-12 times the input's Frobenius norm. Convergence is
    quadratic; `max_sweeps` is a hard stop for pathological input.
    """
    A = _as_matrix(C)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = np.abs(A).max()
    if np.abs(A - A.T).max() > 1e-9 * (1.0 + scale):
        raise ValueError("matrix is not symmetric within 1e-9 relative tolerance")
    m = A.shape[0]
    A = (A + A.T) / 2.0
    V = np.eye(m)
    fro = float(np.linalg.norm(A))
    if fro == 0.0 or m == 1:
        return SymEig(np.diag(A).copy(), V)
    tol = 1e-12 * fro
    upper = np.triu_indices(m, 1)

    def off_norm(mat: np.ndarray) -> float:
        # Summed directly over the off-diagonal entries; the textbook
        # ||A||_F^2 - ||diag||^2 form cancels catastrophically near convergence.
        return float(np.sqrt(2.0 * np.sum(mat[upper] ** 2)))

    converged = False
    for _ in range(max_sweeps):
        if off_norm(A) <= tol:
            converged = True
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
    else:
        converged = off_norm(A) <= tol
    if not converged:
        raise RuntimeError(f"Jacobi sweep limit ({max_sweeps}) reached before convergence")

    lam = np.diag(A).copy()
    order = np.argsort(-lam, kind="stable")
    return SymEig(lam[order], V[:, order])


def spd_log(C, clamp: float = 1e-10) -> np.ndarray:
    """Matrix logarithm of a PSD matrix, with eigenvalues floored at
    clamp * lambda_max so rank-deficient descriptors stay log-mappable.

    Exact inverse of the matrix exponential on strictly positive definite
    input whose spectrum sits above the floor.
    """
    if not clamp > 0:
        raise ValueError("clamp must be positive")
    eig = sym_eig(C)
    lam = eig.eigenvalues
    trace = float(lam.sum())
    if lam[-1] < -1e-8 * max(trace, 0.0):
        raise ValueError(
            f"matrix is indefinite beyond tolerance (min eigenvalue {lam[-1]:.3e})"
        )
    lam_max = float(lam[0])
    if lam_max <= 0.0:
        raise ValueError("matrix has no positive eigenvalue; logarithm undefined")
    logs = np.log(np.maximum(lam, clamp * lam_max))
    L = (eig.eigenvectors * logs) @ eig.eigenvectors.T
    return (L + L.T) / 2.0


def regularize(C, ridge: float):
    """Add a relative ridge: C + ridge * trace(C)/m * I.

    Strictly positive definite whenever ridge > 0 and trace > 0. With
    ridge = 0 the input is returned unchanged, except that an all-zero matrix
    is rejected (there is nothing the ridge could scale against).
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    A = _as_matrix(C)
    trace = float(np.trace(A))
    if ridge == 0.0 and not A.any():
        raise ValueError("cannot regularize the zero matrix with ridge 0")
    if ridge == 0.0:
        return C
    out = A + (ridge * trace / A.shape[0]) * np.eye(A.shape[0])
    return _like(C, out)


def le_dist(C1, C2, clamp: float = 1e-10) -> float:
    """Log-Euclidean distance: Frobenius norm of the difference of matrix logs.

    A true metric on SPD matrices. Block descriptors use their block-diagonal
    embedding, i.e. squared per-block distances add.
    """
    b1, b2 = _blocks_of(C1), _blocks_of(C2)
    if [b.shape for b in b1] != [b.shape for b in b2]:
        raise ValueError("descriptor dimensions do not match")
    sq = 0.0
    for A, B in zip(b1, b2):
        diff = spd_log(A, clamp) - spd_log(B, clamp)
        sq += float(np.sum(diff * diff))
    return float(np.sqrt(sq))


def le_kernel(C1, C2, xi: float = 1.0, clamp: float = 1e-10) -> float:
    """Gaussian kernel on the log-Euclidean distance: exp(-xi * d_LE^2)."""
    if not xi > 0:
        raise ValueError("bandwidth xi must be positive")
    return float(np.exp(-xi * le_dist(C1, C2, clamp) ** 2))


def _logdet_spd(A: np.ndarray) -> float:
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "matrix is singular or not positive definite; log-determinant undefined "
            "(regularize first)"
        ) from exc
    return float(2.0 * np.sum(np.log(np.diag(L))))


def jbld(C1, C2) -> float:
    """Jensen-Bregman log-det divergence:
    logdet((C1+C2)/2) - logdet(C1 C2)/2.

    Symmetric, zero iff the arguments are equal, and invariant under
    congruence C -> A C A^T by an invertible A. Requires strictly positive
    definite input. Block descriptors add per-block divergences (the log-det
    of a block-diagonal matrix is the sum over blocks).
    """
    b1, b2 = _blocks_of(C1), _blocks_of(C2)
    if [b.shape for b in b1] != [b.shape for b in b2]:
        raise ValueError("descriptor dimensions do not match")
    total = 0.0
    for A, B in zip(b1, b2):
        total += _logdet_spd((A + B) / 2.0) - 0.5 * (_logdet_spd(A) + _logdet_spd(B))
    # Concavity of logdet makes the true value nonnegative; roundoff may not.
    return max(total, 0.0)


@dataclass(frozen=True)
class SteinBandwidth:
    """Bandwidth for the Stein kernel; admissibility depends on matrix size."""

    xi: float

    def validate_for(self, dim: int) -> None:
        validate_stein_bandwidth(self.xi, dim)


def validate_stein_bandwidth(xi: float, dim: int) -> None:
    """The Stein kernel is positive definite only for
    xi in {k/2 : k = 1..m-1} union [m, inf); reject anything else."""
    if xi >= dim:
        return
    doubled = 2.0 * xi
    if abs(doubled - round(doubled)) < 1e-12 and 1 <= round(doubled) <= dim - 1:
        return
    raise ValueError(
        f"stein bandwidth {xi} is not admissible for dimension {dim}: "
        f"must be a half-integer k/2 with 1 <= k <= {dim - 1}, or >= {dim}"
    )


def stein_kernel(C1, C2, xi: float | SteinBandwidth = 1.0) -> float:
    """Stein kernel exp(-xi * JBLD); xi must be admissible for every block
    dimension of the inputs."""
    xi_val = xi.xi if isinstance(xi, SteinBandwidth) else float(xi)
    for block in _blocks_of(C1):
        validate_stein_bandwidth(xi_val, block.shape[0])
    return float(np.exp(-xi_val * jbld(C1, C2)))


def combine_kernels(K1, K2, a: float, b: float, mode: str = "sum") -> np.ndarray:
    """Combine two kernel matrices while preserving positive semi-definiteness.

    sum: a*K1 + b*K2 with nonnegative coefficients. product: entrywise
    K1^a * K2^b with positive-integer exponents (Schur products of PSD
    matrices stay PSD; fractional entrywise powers in general do not).
    """
    K1 = np.asarray(K1, dtype=float)
    K2 = np.asarray(K2, dtype=float)
    if K1.shape != K2.shape:
        raise ValueError(f"kernel shapes differ: {K1.shape} vs {K2.shape}")
    if mode == "sum":
        if a < 0 or b < 0:
            raise ValueError("sum mode requires nonnegative coefficients")
        return a * K1 + b * K2
    if mode == "product":
        for name, e in (("a", a), ("b", b)):
            if not float(e).is_integer() or e < 1:
                raise ValueError(
                    f"product mode requires positive integer exponents, got {name}={e}"
                )
        return (K1 ** int(a)) * (K2 ** int(b))
    raise ValueError(f"unknown combination mode {mode!r}")


def log_vectorize(C, clamp: float = 1e-10) -> np.ndarray:
    """Flatten the matrix log to a vector whose Euclidean inner product equals
    the Frobenius inner product of the logs.

    Per block: upper triangle of log(C) in row-major order, off-diagonal
    entries scaled by sqrt(2); blocks are concatenated in order.
    """
    pieces = []
    for A in _blocks_of(C):
        L = spd_log(A, clamp)
        iu = np.triu_indices(L.shape[0])
        weights = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
        pieces.append(L[iu] * weights)
    return np.concatenate(pieces)


def _check_homogeneous(descs) -> None:
    if not descs:
        raise ValueError("need at least one descriptor")
    shapes = [[b.shape for b in _blocks_of(d)] for d in descs]
    if any(s != shapes[0] for s in shapes):
        raise ValueError("descriptors have mismatched dimensions or block layouts")


def gram(descs, measure: str = "le_kernel", xi: float = 1.0, clamp: float = 1e-10) -> np.ndarray:
    """Symmetric N x N kernel matrix over a homogeneous descriptor list.

    Measures: "le_kernel" (exp(-xi * d_LE^2), per-block squared distances
    summed inside the exponential), "stein_kernel" (exp(-xi * JBLD) with
    bandwidth admissibility enforced), and "linear_on_logvec" (inner products
    of log-vectorizations, the linear kernel used after log-mapping).
    """
    descs = list(descs)
    _check_homogeneous(descs)
    n = len(descs)
    if measure in ("le_kernel", "linear_on_logvec"):
        vecs = np.stack([log_vectorize(d, clamp) for d in descs])
        if measure == "linear_on_logvec":
            G = vecs @ vecs.T
            return (G + G.T) / 2.0
        if not xi > 0:
            raise ValueError("bandwidth xi must be positive")
        G = np.ones((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                diff = vecs[i] - vecs[j]
                G[i, j] = G[j, i] = np.exp(-xi * float(diff @ diff))
        return G
    if measure == "stein_kernel":
        for block in _blocks_of(descs[0]):
            validate_stein_bandwidth(xi, block.shape[0])
        blocks = [_blocks_of(d) for d in descs]
        logdets = [sum(_logdet_spd(b) for b in bl) for bl in blocks]
        G = np.ones((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                mid = sum(
                    _logdet_spd((A + B) / 2.0) for A, B in zip(blocks[i], blocks[j])
                )
                div = max(mid - 0.5 * (logdets[i] + logdets[j]), 0.0)
                G[i, j] = G[j, i] = np.exp(-xi * div)
        return G
    raise ValueError(f"unknown gram measure {measure!r}")


# ---------------------------------------------------------------------------
# Gram-matrix files
# ---------------------------------------------------------------------------


def save_gram(K: np.ndarray, path, format: str = None, header: str = None) -> None:
    """Write a Gram matrix as CSV rows or GRM1 binary (magic, N, row-major
    float64). `header` lines (without trailing newline) are prepended to CSV."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("gram matrix must be square")
    path = str(path)
    if format is None:
        format = "csv" if path.lower().endswith(".csv") else "grm1"
    if format == "csv":
        lines = [] if header is None else [header]
        lines += [",".join(repr(float(x)) for x in row) for row in K]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif format == "grm1":
        with open(path, "wb") as fh:
            fh.write(GRM_MAGIC + struct.pack("<I", K.shape[0]) + K.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown gram format {format!r}")


def load_gram(path, format: str = None) -> np.ndarray:
    path = str(path)
    if format is None:
        format = "csv" if path.lower().endswith(".csv") else "grm1"
    if format == "csv":
        rows = []
        with open(path) as fh:
            for line in fh:
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                rows.append([float(x) for x in line.split(",")])
        K = np.array(rows)
    elif format == "grm1":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < 8 or raw[:4] != GRM_MAGIC:
            raise ValueError(f"{path}: not a GRM1 file")
        (n,) = struct.unpack_from("<I", raw, 4)
        if len(raw) != 8 + 8 * n * n:
            raise ValueError(f"{path}: truncated payload")
        K = np.frombuffer(raw, dtype="<f8", count=n * n, offset=8).reshape(n, n).copy()
    else:
        raise ValueError(f"unknown gram format {format!r}")
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"{path}: gram matrix is not square")
    return K
