"""End-to-end training objectives on second-order descriptors.

A sequence's score matrix T (classes x frames) is pooled into the scaled
cross-product CP = T T^T / n and regressed onto a diagonal SPD label encoding.
Two losses are provided, with analytic gradients verified against central
finite differences:

* jbld: the log-det divergence between CP and the label matrix,
* frob: the squared Frobenius distance between them.

A small trainer drives a linear map + per-frame softmax through either loss
with fixed-learning-rate momentum descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pooling import SpdDescriptor, tcp
from .trajectory import Dataset, FeatureTrajectory, TrajectoryKind, save_trajectory, load_trajectory

# Relative ridge for rank-deficient CP. The standalone losses apply it only
# when the Cholesky factorization fails, so they agree with the plain
# divergence to roundoff on well-conditioned input; the trainer keeps it on
# throughout for a smooth objective.
CP_RIDGE = 1e-8

LOSS_KINDS = ("jbld", "frob")


@dataclass(frozen=True)
class LabelMatrix:
    """Diagonal SPD encoding of a class label.

    The labeled entry is 1/(1+(M-1)eps), every other diagonal entry is
    eps/(1+(M-1)eps); the trace is exactly 1 and the matrix is strictly
    positive definite iff eps > 0.
    """

    dim: int
    label: int
    epsilon: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 1 <= self.label <= self.dim:
            raise ValueError(f"label {self.label} outside [1, {self.dim}]")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def matrix(self) -> np.ndarray:
        denom = 1.0 + (self.dim - 1) * self.epsilon
        diag = np.full(self.dim, self.epsilon / denom)
        diag[self.label - 1] = 1.0 / denom
        return np.diag(diag)


def encode_label(label: int, num_classes: int, epsilon: float = 1e-5) -> LabelMatrix:
    """Cast a 1-based class label into its diagonal SPD matrix encoding."""
    return LabelMatrix(num_classes, label, epsilon)


def _target(Y) -> np.ndarray:
    if isinstance(Y, LabelMatrix):
        return Y.matrix
    return np.asarray(Y, dtype=float)


def cp_scaled(T: np.ndarray) -> SpdDescriptor:
    """Frame-count-scaled cross-product descriptor T T^T / n.

    Shares the pooling code path, so it agrees with tcp(..., scale="by_n")
    bit for bit.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2:
        raise ValueError("T must be a 2-D matrix")
    return tcp(FeatureTrajectory(T, TrajectoryKind.FEATURES), scale="by_n")


def _chol_logdet(A: np.ndarray) -> float | None:
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    return float(2.0 * np.sum(np.log(np.diag(L))))


def _cp_for_loss(T: np.ndarray) -> tuple[np.ndarray, float]:
    """CP and its log-det, ridged only if CP is numerically rank deficient."""
    CP = cp_scaled(T).values
    logdet = _chol_logdet(CP)
    if logdet is None:
        M = CP.shape[0]
        CP = CP + (CP_RIDGE * np.trace(CP) / M) * np.eye(M)
        logdet = _chol_logdet(CP)
        if logdet is None:
            raise ValueError(
                "CP(T) is rank deficient and could not be ridged into a positive "
                "definite matrix; regularize it or use a longer clip (n >= classes)"
            )
    return CP, logdet


def jbld_loss(T: np.ndarray, Y) -> float:
    """Log-det divergence between CP(T) and the label matrix:
    logdet((Y+CP)/2) - logdet(Y)/2 - logdet(CP)/2."""
    T = np.asarray(T, dtype=float)
    Ym = _target(Y)
    logdet_Y = _chol_logdet(Ym)
    if logdet_Y is None:
        raise ValueError("label matrix must be strictly positive definite (epsilon > 0)")
    CP, logdet_CP = _cp_for_loss(T)
    return _chol_logdet((Ym + CP) / 2.0) - 0.5 * logdet_Y - 0.5 * logdet_CP


def jbld_loss_grad(T: np.ndarray, Y) -> np.ndarray:
    """Gradient of the log-det loss with respect to T:
    (2/n) * [ (CP+Y)^{-1} - CP^{-1}/2 ] * T."""
    T = np.asarray(T, dtype=float)
    Ym = _target(Y)
    CP, _ = _cp_for_loss(T)
    n = T.shape[1]
    G = np.linalg.inv(CP + Ym) - 0.5 * np.linalg.inv(CP)
    return (2.0 / n) * (G @ T)


def frob_loss(T: np.ndarray, Y) -> float:
    """Squared Frobenius distance between CP(T) and the label matrix."""
    diff = cp_scaled(T).values - _target(Y)
    return float(np.sum(diff * diff))


def frob_loss_grad(T: np.ndarray, Y) -> np.ndarray:
    """Gradient of the squared-Frobenius loss with respect to T:
    (4/n) * (CP - Y) * T.

    The factor is 4/n, not 2/n: the squared norm contributes one factor of 2
    and the symmetric product T T^T another (d/dT tr[(TT^T/n - Y)^2] pairs
    each entry of T with both triangles). Verified by the central-difference
    oracle in fd_gradient.
    """
    T = np.asarray(T, dtype=float)
    n = T.shape[1]
    diff = cp_scaled(T).values - _target(Y)
    return (4.0 / n) * (diff @ T)


_LOSS_FNS = {"jbld": (jbld_loss, jbld_loss_grad), "frob": (frob_loss, frob_loss_grad)}


@dataclass(frozen=True)
class GradCheckReport:
    """Central-difference verification of an analytic gradient."""

    max_relative_error: float
    error_matrix: np.ndarray
    step: float
    analytic: np.ndarray
    numeric: np.ndarray


def fd_gradient(loss: str, T: np.ndarray, Y, h: float = 1e-6) -> GradCheckReport:
    """Check a loss gradient entrywise against (f(T+hE) - f(T-hE)) / 2h.

    Relative error per entry is |a - b| / max(1, |a|, |b|).
    """
    if loss not in _LOSS_FNS:
        raise ValueError(f"unknown loss kind {loss!r}; expected one of {LOSS_KINDS}")
    if not h > 0:
        raise ValueError("step h must be positive")
    fn, grad_fn = _LOSS_FNS[loss]
    T = np.asarray(T, dtype=float)
    analytic = grad_fn(T, Y)
    numeric = np.empty_like(T)
    for idx in np.ndindex(*T.shape):
        Tp = T.copy()
        Tp[idx] += h
        Tm = T.copy()
        Tm[idx] -= h
        numeric[idx] = (fn(Tp, Y) - fn(Tm, Y)) / (2.0 * h)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    errors = np.abs(analytic - numeric) / denom
    return GradCheckReport(
        max_relative_error=float(errors.max()),
        error_matrix=errors,
        step=h,
        analytic=analytic,
        numeric=numeric,
    )


# ---------------------------------------------------------------------------
# Toy end-to-end trainer: linear map + per-frame softmax
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearMap:
    """Class-scoring linear map applied to each frame's feature vector."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or not np.all(np.isfinite(m)):
            raise ValueError("linear map must be a finite 2-D matrix")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def output_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[1]

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Per-frame softmax of W @ X (columns are frames)."""
        return _softmax_columns(self.matrix @ X)


def save_linear_map(lmap: LinearMap, path) -> None:
    save_trajectory(
        FeatureTrajectory(lmap.matrix, TrajectoryKind.FEATURES, "linear-map"),
        path,
        "trj-binary",
    )


def load_linear_map(path) -> LinearMap:
    return LinearMap(load_trajectory(path, "trj-binary").values)


def _softmax_columns(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=0, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=0, keepdims=True)


def _softmax_backward(S: np.ndarray, dS: np.ndarray) -> np.ndarray:
    # Per-column softmax Jacobian, classes on axis -2: dZ = S * (dS - sum(S * dS)).
    SG = S * dS
    return SG - S * SG.sum(axis=-2, keepdims=True)


def _batched_logdet(mats: np.ndarray, error_hint: str) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError as exc:
        raise ValueError(error_hint) from exc
    diags = np.diagonal(chol, axis1=-2, axis2=-1)
    return 2.0 * np.log(diags).sum(axis=-1)


@dataclass(frozen=True)
class TrainResult:
    linear_map: LinearMap
    loss_trace: np.ndarray


def train_linear(
    dataset: Dataset,
    loss: str = "frob",
    lr: float = 1e-4,
    momentum: float = 0.9,
    iters: int = 500,
    clip_len: int = 30,
    seed: int = 0,
    epsilon: float = None,
    init_scale: float = 0.05,
) -> TrainResult:
    """Momentum gradient descent of a linear map + per-frame softmax through
    the chosen pooled loss, summed over sequences.

    Each sequence contributes one fixed clip of `clip_len` frames whose start
    is drawn once from the seed, so the objective is fixed and the run is
    deterministic. The returned trace holds the initial loss followed by the
    loss after each of the `iters` updates.
    """
    if loss not in _LOSS_FNS:
        raise ValueError(f"unknown loss kind {loss!r}; expected one of {LOSS_KINDS}")
    if epsilon is None:
        epsilon = 1e-5 if loss == "jbld" else 0.0

    dims = {rec.trajectory.num_channels for rec in dataset.records}
    if len(dims) != 1:
        raise ValueError(f"sequences have mixed channel counts: {sorted(dims)}")
    (d_in,) = dims
    shortest = min(rec.trajectory.num_frames for rec in dataset.records)
    if clip_len > shortest:
        raise ValueError(f"clip_len {clip_len} exceeds shortest sequence ({shortest} frames)")

    M = dataset.num_classes
    rng = np.random.default_rng(seed)
    W = init_scale * rng.standard_normal((M, d_in))
    clips = []
    targets = []
    for rec in dataset.records:
        start = int(rng.integers(0, rec.trajectory.num_frames - clip_len + 1))
        clips.append(rec.trajectory.values[:, start : start + clip_len])
        targets.append(encode_label(rec.label, M, epsilon).matrix)

    N = len(clips)
    X = np.stack(clips)  # (N, d_in, clip_len)
    Y = np.stack(targets)  # (N, M, M)
    X_flat = X.transpose(1, 0, 2).reshape(d_in, N * clip_len)
    logdet_Y = None
    if loss == "jbld":
        logdet_Y = _batched_logdet(
            Y, "label matrix must be strictly positive definite (epsilon > 0)"
        )

    def epoch(weights: np.ndarray, want_grad: bool):
        S = _softmax_columns(weights @ X_flat)
        S3 = S.reshape(M, N, clip_len).transpose(1, 0, 2)  # (N, M, clip_len)
        CP = S3 @ S3.transpose(0, 2, 1) / clip_len
        if loss == "frob":
            diff = CP - Y
            total = float(np.sum(diff * diff))
            dS = (4.0 / clip_len) * (diff @ S3) if want_grad else None
        else:
            # The trainer's objective carries the relative ridge unconditionally
            # so the loss surface stays smooth across conditioning changes.
            ridge = CP_RIDGE * np.trace(CP, axis1=1, axis2=2) / M
            CPr = CP + ridge[:, None, None] * np.eye(M)
            hint = "CP is rank deficient; use a longer clip (clip_len >= classes)"
            logdet_CP = _batched_logdet(CPr, hint)
            logdet_mid = _batched_logdet((Y + CPr) / 2.0, hint)
            total = float(np.sum(logdet_mid - 0.5 * logdet_Y - 0.5 * logdet_CP))
            if want_grad:
                G = np.linalg.inv(CPr + Y) - 0.5 * np.linalg.inv(CPr)
                dS = (2.0 / clip_len) * (G @ S3)
            else:
                dS = None
        if not want_grad:
            return total, None
        dZ3 = _softmax_backward(S3, dS)
        grad = dZ3.transpose(1, 0, 2).reshape(M, N * clip_len) @ X_flat.T
        return total, grad

    trace = np.empty(iters + 1)
    velocity = np.zeros_like(W)
    for it in range(iters):
        value, grad = epoch(W, True)
        if not np.isfinite(value):
            raise RuntimeError(f"training diverged: non-finite loss at iteration {it}")
        trace[it] = value
        velocity = momentum * velocity - lr * grad
        W = W + velocity
    final, _ = epoch(W, False)
    if not np.isfinite(final):
        raise RuntimeError(f"training diverged: non-finite loss at iteration {iters}")
    trace[iters] = final
    return TrainResult(LinearMap(W), trace)


def save_loss_trace(trace: np.ndarray, path, header: str = None) -> None:
    """Write `iteration,loss` CSV lines, optionally preceded by header lines."""
    lines = [] if header is None else [header]
    lines.append("iteration,loss")
    lines += [f"{i},{repr(float(v))}" for i, v in enumerate(np.asarray(trace))]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
