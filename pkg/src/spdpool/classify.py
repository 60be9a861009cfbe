"""Sequence classification on pooled descriptors.

One-vs-rest kernel SVMs are trained by sequential minimal optimization
directly on a precomputed Gram matrix, with seeded pair selection so training
is deterministic. Evaluation covers accuracy, all-points average precision,
confusion matrices, and stratified k-fold splits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .trajectory import Dataset

SVM_MAGIC = b"SVM1"


def fuse_concat(vectors) -> np.ndarray:
    """Concatenate per-stream descriptor vectors in declared stream order."""
    vectors = [np.asarray(v, dtype=float).ravel() for v in vectors]
    if not vectors:
        raise ValueError("no streams to fuse")
    return np.concatenate(vectors)


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel produced the Gram matrix this model was trained on."""

    measure: str = "precomputed"
    params: tuple = ()


@dataclass(frozen=True)
class BinaryModel:
    support: np.ndarray  # indices into the training set
    dual_coef: np.ndarray  # alpha_i * y_i for the support points
    bias: float


@dataclass(frozen=True)
class SvmModel:
    classes: tuple  # one BinaryModel per class, in class order 1..M
    num_train: int
    C: float
    kernel: KernelSpec = KernelSpec()

    @property
    def num_classes(self) -> int:
        return len(self.classes)


def _smo_binary(
    K: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float,
    max_passes: int,
    rng: np.random.Generator,
    max_sweeps: int,
) -> tuple[np.ndarray, float]:
    """Simplified SMO over a precomputed kernel.

    Terminates after `max_passes` consecutive full sweeps without an update,
    at which point every point satisfies its KKT condition within tol.
    """
    n = len(y)
    alpha = np.zeros(n)
    if n == 1:
        # no pair to optimize; the bias alone satisfies the KKT conditions
        return alpha, float(y[0])
    b = 0.0
    decision = np.zeros(n)  # sum_j alpha_j y_j K_ij + b, kept incrementally

    def try_pair(i, j, err_i):
        nonlocal b, decision
        err_j = decision[j] - y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            low = max(0.0, aj_old - ai_old)
            high = min(C, C + aj_old - ai_old)
        else:
            low = max(0.0, ai_old + aj_old - C)
            high = min(C, ai_old + aj_old)
        if low >= high:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0:
            return False
        aj = aj_old - y[j] * (err_i - err_j) / eta
        aj = min(max(aj, low), high)
        if abs(aj - aj_old) < 1e-12:
            return False
        ai = ai_old + y[i] * y[j] * (aj_old - aj)
        di, dj = ai - ai_old, aj - aj_old
        b1 = b - err_i - y[i] * di * K[i, i] - y[j] * dj * K[i, j]
        b2 = b - err_j - y[i] * di * K[i, j] - y[j] * dj * K[j, j]
        if 0 < ai < C:
            b_new = b1
        elif 0 < aj < C:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0
        decision += y[i] * di * K[:, i] + y[j] * dj * K[:, j] + (b_new - b)
        alpha[i], alpha[j] = ai, aj
        b = b_new
        return True

    quiet = 0
    sweeps = 0
    while quiet < max_passes and sweeps < max_sweeps:
        changed = 0
        for i in range(n):
            err_i = decision[i] - y[i]
            if not (
                (y[i] * err_i < -tol and alpha[i] < C)
                or (y[i] * err_i > tol and alpha[i] > 0)
            ):
                continue
            # Seeded random partner first; if that pair makes no progress,
            # scan the rest so a quiet pass certifies the KKT conditions.
            j = int(rng.integers(n - 1))
            if j >= i:
                j += 1
            if try_pair(i, j, err_i):
                changed += 1
                continue
            for k in rng.permutation(n):
                if k != i and k != j and try_pair(i, int(k), err_i):
                    changed += 1
                    break
        sweeps += 1
        quiet = quiet + 1 if changed == 0 else 0
    return alpha, b


def svm_train(
    gram: np.ndarray,
    labels,
    C: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 0,
    kernel: KernelSpec = KernelSpec(),
    num_classes: int = None,
    max_sweeps: int = 2000,
) -> SvmModel:
    """Train one-vs-rest binary SVMs on a precomputed Gram matrix.

    The Gram matrix must be symmetric and PSD within tolerance (smallest
    eigenvalue >= -1e-6 * trace); an indefinite kernel is rejected outright
    since SMO on it can cycle or converge to a meaningless solution.
    """
    K = np.asarray(gram, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("gram matrix must be square")
    if len(labels) != K.shape[0]:
        raise ValueError("label count does not match gram size")
    if not C > 0:
        raise ValueError("C must be positive")
    if np.abs(K - K.T).max() > 1e-8 * (1.0 + np.abs(K).max()):
        raise ValueError("gram matrix is not symmetric")
    trace = float(np.trace(K))
    min_eig = float(np.linalg.eigvalsh(K).min())
    if min_eig < -1e-6 * max(trace, 0.0):
        raise ValueError(
            f"gram matrix is not PSD within tolerance: min eigenvalue {min_eig:.3e} "
            f"vs trace {trace:.3e}"
        )
    if num_classes is None:
        num_classes = int(labels.max())
    if labels.min() < 1 or labels.max() > num_classes:
        raise ValueError(f"labels must lie in [1, {num_classes}]")

    per_class = []
    for cls in range(1, num_classes + 1):
        y = np.where(labels == cls, 1.0, -1.0)
        rng = np.random.default_rng((seed, cls))
        alpha, bias = _smo_binary(K, y, C, tol, max_passes, rng, max_sweeps)
        support = np.nonzero(alpha > 1e-12)[0]
        per_class.append(
            BinaryModel(support, alpha[support] * y[support], float(bias))
        )
    return SvmModel(tuple(per_class), num_train=K.shape[0], C=C, kernel=kernel)


def svm_predict(model: SvmModel, kernel_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decision values and argmax labels for test rows of kernel values
    against the model's training set; ties break toward the lowest class."""
    rows = np.atleast_2d(np.asarray(kernel_rows, dtype=float))
    if rows.shape[1] != model.num_train:
        raise ValueError(
            f"kernel rows have {rows.shape[1]} columns, model was trained on "
            f"{model.num_train} points"
        )
    scores = np.empty((rows.shape[0], model.num_classes))
    for c, binary in enumerate(model.classes):
        scores[:, c] = rows[:, binary.support] @ binary.dual_coef + binary.bias
    return scores, np.argmax(scores, axis=1) + 1


def max_kkt_violation(gram: np.ndarray, labels, model: SvmModel) -> float:
    """Largest KKT violation over all one-vs-rest problems of a trained model;
    at SMO convergence this does not exceed the training tolerance."""
    K = np.asarray(gram, dtype=float)
    labels = np.asarray(labels, dtype=int)
    worst = 0.0
    for cls, binary in enumerate(model.classes, start=1):
        y = np.where(labels == cls, 1.0, -1.0)
        alpha = np.zeros(model.num_train)
        alpha[binary.support] = binary.dual_coef * y[binary.support]
        margin = y * (K @ (alpha * y) + binary.bias) - 1.0
        below = np.where(alpha < model.C - 1e-9, -margin, 0.0)
        above = np.where(alpha > 1e-9, margin, 0.0)
        worst = max(worst, float(below.max()), float(above.max()))
    return worst


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def average_precision(scores, positives) -> float:
    """All-points average precision: mean over positives of the precision at
    each positive's rank, ranking by descending score (ties keep input order)."""
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    if scores.shape != positives.shape or scores.ndim != 1:
        raise ValueError("scores and positives must be equal-length vectors")
    if not positives.any():
        raise ValueError("average precision needs at least one positive item")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    ranks = np.arange(1, len(scores) + 1)
    precision_at_hits = np.cumsum(hits)[hits] / ranks[hits]
    return float(precision_at_hits.mean())


def kfold(dataset, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold split: per class, shuffled indices are dealt
    round-robin across folds (with a running offset so fold sizes stay even).
    Returns (train_indices, test_indices) pairs covering all items exactly once.
    """
    labels = dataset.labels() if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=int)
    n = len(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available items")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=int)
    offset = 0
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        for pos, i in enumerate(idx):
            fold_of[i] = (offset + pos) % k
        offset += len(idx)
    folds = []
    for f in range(k):
        test = np.nonzero(fold_of == f)[0]
        train = np.nonzero(fold_of != f)[0]
        folds.append((train, test))
    return folds


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class_ap: np.ndarray
    mean_ap: float
    confusion: np.ndarray  # rows = ground truth, columns = predicted
    fold_id: int | None = None


def evaluate(scores: np.ndarray, predicted, truth, fold_id: int = None) -> EvalReport:
    """Accuracy, per-class average precision (one-vs-rest on score columns),
    mean AP, and the confusion matrix. `predicted=None` uses argmax scores."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    truth = np.asarray(truth, dtype=int)
    if scores.shape[0] != len(truth):
        raise ValueError("scores and ground truth lengths differ")
    num_classes = scores.shape[1]
    if predicted is None:
        predicted = np.argmax(scores, axis=1) + 1
    predicted = np.asarray(predicted, dtype=int)
    if len(predicted) != len(truth):
        raise ValueError("predictions and ground truth lengths differ")
    if truth.min() < 1 or truth.max() > num_classes:
        raise ValueError(f"ground-truth labels must lie in [1, {num_classes}]")

    accuracy = float(np.mean(predicted == truth))
    confusion = np.zeros((num_classes, num_classes), dtype=int)
    for t, p in zip(truth, predicted):
        confusion[t - 1, p - 1] += 1
    per_class = np.array(
        [average_precision(scores[:, c], truth == c + 1) for c in range(num_classes)]
    )
    return EvalReport(
        accuracy=accuracy,
        per_class_ap=per_class,
        mean_ap=float(per_class.mean()),
        confusion=confusion,
        fold_id=fold_id,
    )


def report_to_csv(report: EvalReport, header: str = None) -> str:
    lines = [] if header is None else [header]
    lines.append(f"accuracy,{report.accuracy!r}")
    lines.append(f"mean_ap,{report.mean_ap!r}")
    for c, ap in enumerate(report.per_class_ap, start=1):
        lines.append(f"ap_class_{c},{float(ap)!r}")
    for c, row in enumerate(report.confusion, start=1):
        lines.append(f"confusion_row_{c}," + ",".join(str(int(x)) for x in row))
    return "\n".join(lines) + "\n"


def report_to_text(report: EvalReport) -> str:
    lines = []
    if report.fold_id is not None:
        lines.append(f"fold: {report.fold_id}")
    lines.append(f"accuracy: {report.accuracy:.4f}")
    lines.append(f"mean AP:  {report.mean_ap:.4f}")
    for c, ap in enumerate(report.per_class_ap, start=1):
        lines.append(f"  AP class {c}: {float(ap):.4f}")
    lines.append("confusion (rows = truth, cols = predicted):")
    for row in report.confusion:
        lines.append("  " + " ".join(f"{int(x):5d}" for x in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def save_model(model: SvmModel, path) -> None:
    """Write SVM1: class count, training size, C, then per class the support
    indices, dual coefficients, and bias, then the kernel tag and params."""
    chunks = [SVM_MAGIC, struct.pack("<IId", model.num_classes, model.num_train, model.C)]
    for binary in model.classes:
        chunks.append(struct.pack("<I", len(binary.support)))
        chunks.append(binary.support.astype("<u4").tobytes())
        chunks.append(binary.dual_coef.astype("<f8").tobytes())
        chunks.append(struct.pack("<d", binary.bias))
    tag = model.kernel.measure.encode("utf-8")
    chunks.append(struct.pack("<I", len(tag)) + tag)
    params = np.asarray(model.kernel.params, dtype="<f8")
    chunks.append(struct.pack("<I", len(params)) + params.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_model(path) -> SvmModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 20 or raw[:4] != SVM_MAGIC:
        raise ValueError(f"{path}: not an SVM1 file")
    num_classes, num_train, C = struct.unpack_from("<IId", raw, 4)
    offset = 20
    classes = []
    for _ in range(num_classes):
        (count,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        support = np.frombuffer(raw, dtype="<u4", count=count, offset=offset).astype(int)
        offset += 4 * count
        dual = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).copy()
        offset += 8 * count
        (bias,) = struct.unpack_from("<d", raw, offset)
        offset += 8
        classes.append(BinaryModel(support, dual, bias))
    (tag_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    tag = raw[offset : offset + tag_len].decode("utf-8")
    offset += tag_len
    (n_params,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    params = tuple(np.frombuffer(raw, dtype="<f8", count=n_params, offset=offset))
    offset += 8 * n_params
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return SvmModel(tuple(classes), num_train=num_train, C=C, kernel=KernelSpec(tag, params))
