"""Second-order sequence descriptors.

Three poolings of a d x n trajectory matrix T:

* tcp: the uncentered cross-product T T^T (optionally divided by n). Entry
  (j, k) is the inner product of channel trajectories j and k, so diagonals
  lower-bound the first-order (average-pool) statistics.
* kcp: the inner product replaced by a summed RBF similarity
  sum_i exp(-gamma (T_ji - T_ki)^2); diagonals equal the frame count exactly.
* bkcp: a block-diagonal approximation of kcp that permutes channels, computes
  kcp on consecutive blocks of p channels, and averages over several seeded
  permutations. Storage is linear in d at fixed p.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .trajectory import FeatureTrajectory

SPD_MAGIC = b"SPD1"


@dataclass(frozen=True)
class SpdDescriptor:
    """A dense symmetric positive semi-definite sequence descriptor.

    The PSD invariant (smallest eigenvalue >= -1e-8 * trace) holds for every
    descriptor this module constructs; it is not re-verified per instance.
    """

    values: np.ndarray
    n_frames: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"descriptor must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("descriptor has non-finite entries")
        scale = np.abs(v).max()
        if np.abs(v - v.T).max() > 1e-9 * (1.0 + scale):
            raise ValueError("descriptor is not symmetric")
        v = (v + v.T) / 2.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def storage_size(self) -> int:
        """Unique entries kept on disk: one triangle including the diagonal."""
        return self.dim * (self.dim + 1) // 2


@dataclass(frozen=True)
class RbfParams:
    """Bandwidth of the RBF similarity exp(-gamma * x^2)."""

    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class BkcpConfig:
    """Block-pooling layout: block length p, permutation count, and their seed."""

    block_len: int = 16
    num_permutations: int = 3
    seed: int = 0

    def __post_init__(self):
        # p = 1 keeps only diagonals, which are identically n and carry nothing.
        if self.block_len < 2:
            raise ValueError(f"block_len must be >= 2, got {self.block_len}")
        if self.num_permutations < 1:
            raise ValueError("num_permutations must be >= 1")


@dataclass(frozen=True)
class BlockDescriptor:
    """An ordered list of small SPD blocks approximating one full descriptor."""

    blocks: tuple
    total_dim: int
    config: BkcpConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if sum(b.dim for b in self.blocks) != self.total_dim:
            raise ValueError("block dims must sum to total_dim")

    @property
    def storage_size(self) -> int:
        return sum(b.storage_size for b in self.blocks)

    def block_dims(self) -> tuple[int, ...]:
        return tuple(b.dim for b in self.blocks)


def _gamma_of(params) -> float:
    if isinstance(params, RbfParams):
        return params.gamma
    return RbfParams(float(params)).gamma


def tcp(t: FeatureTrajectory, scale: str = "none") -> SpdDescriptor:
    """Cross-product pooling T T^T of an (already weighted) trajectory.

    scale="by_n" divides by the frame count, matching the descriptor the
    training losses differentiate.
    """
    values = t.values @ t.values.T
    if scale == "by_n":
        values = values / t.num_frames
    elif scale != "none":
        raise ValueError(f"unknown tcp scale {scale!r}")
    return SpdDescriptor(values, n_frames=t.num_frames)


def _kcp_matrix(rows: np.ndarray, gamma: float) -> np.ndarray:
    # Per-frame summands are sorted and then accumulated one frame slice at a
    # time, so each entry depends only on the multiset of its summands: frame
    # permutations are bitwise invariant (a strided axis reduction is not).
    diff = rows[:, None, :] - rows[None, :, :]
    sims = np.exp(-gamma * diff * diff)
    sims.sort(axis=-1)
    out = np.zeros(sims.shape[:2])
    for i in range(sims.shape[-1]):
        out = out + sims[:, :, i]
    return out


def kcp(t: FeatureTrajectory, params: RbfParams | float = 1.0) -> SpdDescriptor:
    """RBF-similarity pooling: entry (j,k) = sum_i exp(-gamma (T_ji - T_ki)^2).

    Each frame contributes a Gaussian-kernel Gram matrix of that frame's d
    scalar values, so the sum is PSD; every diagonal entry equals the frame
    count exactly.
    """
    gamma = _gamma_of(params)
    return SpdDescriptor(_kcp_matrix(t.values, gamma), n_frames=t.num_frames)


def _fisher_yates(n: int, rng: np.random.Generator) -> np.ndarray:
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def bkcp(
    t: FeatureTrajectory,
    params: RbfParams | float = 1.0,
    config: BkcpConfig = BkcpConfig(),
) -> BlockDescriptor:
    """Block-diagonal approximation of kcp.

    Channels are shuffled by each of `num_permutations` seeded permutations
    (permutation #1 is always the identity), partitioned into consecutive
    blocks of `block_len` rows (the final block holds d mod p rows when p does
    not divide d), and kcp is computed per block. Each computed entry is mapped
    back to its original channel pair; entries whose channels share a block
    under the identity partition are accumulated there, the rest fall outside
    the block-diagonal support and are discarded. Accumulated entries are
    divided by the permutation count, which keeps every block an average of
    masked PSD matrices and hence PSD.
    """
    gamma = _gamma_of(params)
    d, n = t.values.shape
    p = config.block_len
    if p > d:
        raise ValueError(f"block_len {p} exceeds channel count {d}")

    sizes = [p] * (d // p) + ([d % p] if d % p else [])
    num_blocks = len(sizes)
    accum = np.zeros((num_blocks, p, p))

    rng = np.random.default_rng(config.seed)
    perms = [np.arange(d)]
    perms += [_fisher_yates(d, rng) for _ in range(config.num_permutations - 1)]

    for perm in perms:
        shuffled = t.values[perm]
        for start in range(0, d, p):
            stop = min(start + p, d)
            feats = perm[start:stop]
            block = _kcp_matrix(shuffled[start:stop], gamma)
            canon = feats // p
            local = feats - canon * p
            same = canon[:, None] == canon[None, :]
            ui, vi = np.nonzero(same)
            np.add.at(accum, (canon[ui], local[ui], local[vi]), block[ui, vi])

    accum /= config.num_permutations
    blocks = tuple(
        SpdDescriptor(accum[i, :s, :s], n_frames=n) for i, s in enumerate(sizes)
    )
    return BlockDescriptor(blocks, total_dim=d, config=config)


# ---------------------------------------------------------------------------
# SPD1 descriptor files
# ---------------------------------------------------------------------------


def save_descriptor(desc: SpdDescriptor | BlockDescriptor, path) -> None:
    """Write a descriptor as SPD1: block count, then per-block dim and the
    lower triangle in row-major float64; a plain descriptor is one block."""
    blocks = desc.blocks if isinstance(desc, BlockDescriptor) else (desc,)
    chunks = [SPD_MAGIC, struct.pack("<I", len(blocks))]
    for b in blocks:
        m = b.dim
        tri = b.values[np.tril_indices(m)]
        chunks.append(struct.pack("<I", m))
        chunks.append(tri.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_descriptor(path) -> SpdDescriptor | BlockDescriptor:
    """Read an SPD1 file; a single-block file loads as a plain SpdDescriptor.

    The frame count is not stored in the format, so loaded descriptors carry
    n_frames=0.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != SPD_MAGIC:
        raise ValueError(f"{path}: not an SPD1 file")
    (count,) = struct.unpack_from("<I", raw, 4)
    offset = 8
    blocks = []
    for _ in range(count):
        if offset + 4 > len(raw):
            raise ValueError(f"{path}: truncated block header")
        (m,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        n_tri = m * (m + 1) // 2
        if offset + 8 * n_tri > len(raw):
            raise ValueError(f"{path}: truncated block payload")
        tri = np.frombuffer(raw, dtype="<f8", count=n_tri, offset=offset)
        offset += 8 * n_tri
        values = np.zeros((m, m))
        values[np.tril_indices(m)] = tri
        values = values + np.tril(values, -1).T
        blocks.append(SpdDescriptor(values))
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    if count == 1:
        return blocks[0]
    return BlockDescriptor(tuple(blocks), total_dim=sum(b.dim for b in blocks))
