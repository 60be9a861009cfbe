"""Per-sequence feature trajectories: data types, file I/O, score normalization,
temporal weighting, first-order pooling baselines, and a synthetic co-activation
dataset generator.

A trajectory is a d x n real matrix: row m is the time series of channel m
(a classifier confidence or a raw feature activation) over the n frames of one
sequence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

TRJ_MAGIC = b"TRJ1"


class TrajectoryKind(Enum):
    """Whether the rows are classifier confidence scores or raw feature channels."""

    SCORES = "scores"
    FEATURES = "features"


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureTrajectory:
    """A d x n matrix of per-frame channel values for one sequence.

    Rows are channels, columns are frames. All entries must be finite.
    """

    values: np.ndarray
    kind: TrajectoryKind = TrajectoryKind.FEATURES
    sequence_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"trajectory must be a 2-D matrix with d,n >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise ValueError(f"non-finite entry at row {bad[0]}, column {bad[1]}")
        object.__setattr__(self, "values", _frozen_array(v))
        if not isinstance(self.kind, TrajectoryKind):
            object.__setattr__(self, "kind", TrajectoryKind(self.kind))

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WeightProfile:
    """Per-channel temporal weights: row m holds the weights of channel m over frames.

    Every entry is nonnegative and every row sums to 1 (within 1e-9), so each row
    is a convex weighting of that channel's frames.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        sums = w.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"row {bad} sums to {sums[bad]!r}, expected 1 within 1e-9")
        object.__setattr__(self, "weights", _frozen_array(w))

    @classmethod
    def uniform(cls, num_channels: int, num_frames: int) -> "WeightProfile":
        """Weight 1/n on every frame of every channel (the default prior)."""
        return cls(np.full((num_channels, num_frames), 1.0 / num_frames))


@dataclass(frozen=True)
class SequenceRecord:
    """One labeled sequence; labels are 1-based class indices."""

    trajectory: FeatureTrajectory
    label: int


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of labeled sequences."""

    records: tuple
    num_classes: int
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("dataset must contain at least one record")
        for i, rec in enumerate(self.records):
            if not 1 <= rec.label <= self.num_classes:
                raise ValueError(
                    f"record {i} has label {rec.label} outside [1, {self.num_classes}]"
                )

    def labels(self) -> np.ndarray:
        return np.array([rec.label for rec in self.records], dtype=int)

    def __len__(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def _parse_csv_header(line: str) -> tuple[int | None, TrajectoryKind | None]:
    # header: "# d=<int> kind=<scores|features>"
    d, kind = None, None
    for token in line.lstrip("#").split():
        if token.startswith("d="):
            try:
                d = int(token[2:])
            except ValueError as exc:
                raise ValueError(f"malformed header token {token!r}") from exc
        elif token.startswith("kind="):
            try:
                kind = TrajectoryKind(token[5:])
            except ValueError as exc:
                raise ValueError(f"malformed header token {token!r}") from exc
    return d, kind


def _load_csv(path: Path, sequence_id: str) -> FeatureTrajectory:
    lines = path.read_text().splitlines()
    d_declared, kind = None, None
    start = 0
    if lines and lines[0].lstrip().startswith("#"):
        d_declared, kind = _parse_csv_header(lines[0])
        start = 1
    frames = []
    width = d_declared
    for row_idx, line in enumerate(lines[start:]):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ValueError(
                f"ragged row {row_idx}: expected {width} cells, found {len(cells)}"
            )
        frame = np.empty(width)
        for col_idx, cell in enumerate(cells):
            try:
                frame[col_idx] = float(cell)
            except ValueError as exc:
                raise ValueError(
                    f"non-numeric cell at row {row_idx}, column {col_idx}: {cell.strip()!r}"
                ) from exc
            if not np.isfinite(frame[col_idx]):
                raise ValueError(f"non-finite value at row {row_idx}, column {col_idx}")
        frames.append(frame)
    if not frames:
        raise ValueError(f"{path}: no frame rows")
    # CSV rows are frames; internal layout is channels x frames.
    values = np.stack(frames, axis=1)
    return FeatureTrajectory(values, kind or TrajectoryKind.FEATURES, sequence_id)


def _load_binary(path: Path, sequence_id: str) -> FeatureTrajectory:
    raw = path.read_bytes()
    if len(raw) < 13 or raw[:4] != TRJ_MAGIC:
        raise ValueError(f"{path}: not a TRJ1 file")
    d, n = struct.unpack_from("<II", raw, 4)
    kind_byte = raw[12]
    if kind_byte not in (0, 1):
        raise ValueError(f"{path}: unknown kind byte {kind_byte}")
    expected = 13 + 8 * d * n
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {d}x{n}, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", count=d * n, offset=13).reshape(d, n)
    kind = TrajectoryKind.SCORES if kind_byte == 0 else TrajectoryKind.FEATURES
    return FeatureTrajectory(values, kind, sequence_id)


def load_trajectory(path, format: str = None) -> FeatureTrajectory:
    """Read a trajectory from a CSV or TRJ1 binary file.

    `format` is "csv" or "trj-binary"; when omitted it is inferred from the
    file suffix (.csv vs anything else).
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "trj-binary"
    if format == "csv":
        return _load_csv(path, path.stem)
    if format == "trj-binary":
        return _load_binary(path, path.stem)
    raise ValueError(f"unknown trajectory format {format!r}")


def save_trajectory(t: FeatureTrajectory, path, format: str = None) -> None:
    """Write a trajectory; TRJ1 round-trips bit-exactly, CSV to 1e-12 per entry."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "trj-binary"
    d, n = t.values.shape
    if format == "csv":
        lines = [f"# d={d} kind={t.kind.value}"]
        for i in range(n):
            lines.append(",".join(repr(float(x)) for x in t.values[:, i]))
        path.write_text("\n".join(lines) + "\n")
    elif format == "trj-binary":
        kind_byte = 0 if t.kind is TrajectoryKind.SCORES else 1
        payload = t.values.astype("<f8").tobytes()
        path.write_bytes(TRJ_MAGIC + struct.pack("<II", d, n) + bytes([kind_byte]) + payload)
    else:
        raise ValueError(f"unknown trajectory format {format!r}")


def save_labels(pairs, path) -> None:
    """Write `sequence_id,label` CSV lines."""
    lines = [f"{sid},{int(label)}" for sid, label in pairs]
    Path(path).write_text("\n".join(lines) + "\n")


def load_labels(path) -> list[tuple[str, int]]:
    """Read `sequence_id,label` CSV lines."""
    out = []
    for row_idx, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rsplit(",", 1)
        if len(parts) != 2:
            raise ValueError(f"labels row {row_idx}: expected 'sequence_id,label'")
        try:
            out.append((parts[0].strip(), int(parts[1])))
        except ValueError as exc:
            raise ValueError(f"labels row {row_idx}: non-integer label {parts[1]!r}") from exc
    return out


def load_dataset(directory, num_classes: int = None) -> Dataset:
    """Assemble a Dataset from a directory of .trj files plus a labels.csv."""
    directory = Path(directory)
    label_map = dict(load_labels(directory / "labels.csv"))
    records = []
    for f in sorted(directory.glob("*.trj")):
        if f.stem not in label_map:
            raise ValueError(f"{f.name}: no label in labels.csv")
        records.append(SequenceRecord(load_trajectory(f, "trj-binary"), label_map[f.stem]))
    if num_classes is None:
        num_classes = max(label for _, label in label_map.items())
    return Dataset(tuple(records), num_classes, provenance=str(directory))


# ---------------------------------------------------------------------------
# Normalization, weighting, first-order pooling
# ---------------------------------------------------------------------------


def normalize_scores(
    t: FeatureTrajectory, mode: str = "simplex", minmax_scope: str = "frame"
) -> FeatureTrajectory:
    """Normalize each frame's channel values.

    simplex: columns become nonnegative and sum to 1. Columns with negative
        entries are first shifted so their minimum is 0; an all-constant column
        with nonpositive sum maps to the uniform vector 1/d.
    minmax: each column is affinely mapped to [0, 1]; a zero-range column maps
        to all zeros. `minmax_scope="sequence"` rescales by the global min/max
        instead of per frame.
    softmax: each column is replaced by exp/sum-exp of its entries
        (max-subtracted for stability).
    """
    v = t.values.copy()
    d = v.shape[0]
    if mode == "simplex":
        mins = v.min(axis=0)
        shift = np.minimum(mins, 0.0)
        v = v - shift
        sums = v.sum(axis=0)
        degenerate = sums <= 0
        sums[degenerate] = 1.0
        v = v / sums
        v[:, degenerate] = 1.0 / d
    elif mode == "minmax":
        if minmax_scope == "frame":
            lo = v.min(axis=0)
            hi = v.max(axis=0)
        elif minmax_scope == "sequence":
            lo = np.full(v.shape[1], v.min())
            hi = np.full(v.shape[1], v.max())
        else:
            raise ValueError(f"unknown minmax scope {minmax_scope!r}")
        span = hi - lo
        flat = span <= 0
        span[flat] = 1.0
        v = (v - lo) / span
        v[:, flat] = 0.0
    elif mode == "softmax":
        v = v - v.max(axis=0)
        np.exp(v, out=v)
        v /= v.sum(axis=0)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return FeatureTrajectory(v, t.kind, t.sequence_id)


def apply_weights(t: FeatureTrajectory, w: WeightProfile) -> FeatureTrajectory:
    """Entrywise product of trajectory values with a weight profile."""
    if w.weights.shape != t.values.shape:
        raise ValueError(
            f"weight shape {w.weights.shape} does not match trajectory shape {t.values.shape}"
        )
    return FeatureTrajectory(t.values * w.weights, t.kind, t.sequence_id)


def average_pool(t: FeatureTrajectory) -> np.ndarray:
    """Row sums of an (already weighted) trajectory.

    With uniform weights this is the per-channel frame mean.
    """
    return t.values.sum(axis=1)


def max_pool(t: FeatureTrajectory) -> np.ndarray:
    """Per-channel maximum over frames."""
    return t.values.max(axis=1)


# ---------------------------------------------------------------------------
# Synthetic co-activation data
# ---------------------------------------------------------------------------


def _class_pairs(num_classes: int, pairs_per_class: int, channels: int, rng) -> list[list[tuple[int, int]]]:
    """Deal channel pairs to classes, deterministically from the generator.

    Pairs are dealt from a shuffled channel deck two at a time, so they are
    disjoint across classes whenever channels >= 2 * pairs_per_class * num_classes.
    Once the deck runs out, extra pairs are drawn by rejection against the
    class's own pair set (pairs stay distinct within a class).
    """
    deck = [int(c) for c in rng.permutation(channels)]
    ptr = 0
    per_class: list[list[tuple[int, int]]] = []
    for _ in range(num_classes):
        pairs: list[tuple[int, int]] = []
        taken = set()
        while len(pairs) < pairs_per_class:
            if ptr + 2 <= len(deck):
                a, b = deck[ptr], deck[ptr + 1]
                ptr += 2
            else:
                a = int(rng.integers(channels))
                b = int(rng.integers(channels - 1))
                if b >= a:
                    b += 1
            pair = (min(a, b), max(a, b))
            if pair in taken:
                continue
            taken.add(pair)
            pairs.append(pair)
        per_class.append(pairs)
    return per_class


def _components(pairs: list[tuple[int, int]], channels: int) -> list[int]:
    """Map each channel to a connected-component id under the pair graph."""
    parent = list(range(channels))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    return [find(c) for c in range(channels)]


def synth_coactivation(
    num_classes: int,
    channels: int,
    pairs_per_class: int,
    seq_len: int,
    sequences_per_class: int,
    noise_sigma: float = 0.0,
    activation_prob: float = 0.35,
    seed: int = 0,
) -> Dataset:
    """Generate sequences whose classes differ only in second-order structure.

    Every channel is a Bernoulli(activation_prob) activation in every class, so
    per-frame marginal means are identical across classes and carry no class
    signal. Each class couples its own channel pairs: paired channels share one
    latent activation per frame, so their within-frame co-activation rate is
    activation_prob instead of the independent activation_prob**2. Gaussian
    noise is added and values are clipped to [0, 1].
    """
    if not 0.0 < activation_prob < 1.0:
        raise ValueError(f"activation_prob must lie in (0, 1), got {activation_prob}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    if min(num_classes, channels, pairs_per_class, seq_len, sequences_per_class) < 1:
        raise ValueError("all sizes must be at least 1")
    if channels < 2:
        raise ValueError("need at least 2 channels to form a pair")

    rng = np.random.default_rng(seed)
    per_class_pairs = _class_pairs(num_classes, pairs_per_class, channels, rng)
    per_class_comp = [_components(pairs, channels) for pairs in per_class_pairs]

    records = []
    seq_index = 0
    for cls in range(1, num_classes + 1):
        comp = np.array(per_class_comp[cls - 1])
        roots = np.unique(comp)
        root_pos = {int(r): i for i, r in enumerate(roots)}
        comp_idx = np.array([root_pos[int(r)] for r in comp])
        for _ in range(sequences_per_class):
            latents = (rng.random((len(roots), seq_len)) < activation_prob).astype(float)
            values = latents[comp_idx, :]
            if noise_sigma > 0:
                values = values + rng.normal(0.0, noise_sigma, values.shape)
                values = np.clip(values, 0.0, 1.0)
            traj = FeatureTrajectory(
                values, TrajectoryKind.FEATURES, sequence_id=f"seq_{seq_index:04d}"
            )
            records.append(SequenceRecord(traj, cls))
            seq_index += 1
    return Dataset(
        tuple(records),
        num_classes,
        provenance=f"synth_coactivation(seed={seed})",
    )


def coactivation_pairs(
    num_classes: int, pairs_per_class: int, channels: int, seed: int
) -> list[list[tuple[int, int]]]:
    """The channel pairs each class couples, as drawn by synth_coactivation."""
    rng = np.random.default_rng(seed)
    return _class_pairs(num_classes, pairs_per_class, channels, rng)
