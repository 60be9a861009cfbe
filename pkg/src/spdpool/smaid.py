"""Long-range motion-summary images from frame sequences.

A motion channel averages the absolute differences of consecutive grayscale
frames over a window; stacking the channels of consecutive non-overlapping
windows yields a multi-channel summary whose channel order is temporal order
(earliest window first, exported as R < G < B for three channels). Also
provides morphological motion-window localization (frame differencing,
smoothing, dilation, connected components) and binary PNM (P5/P6) I/O.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GrayFrame:
    """A single grayscale frame with real pixel values in [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float)
        if p.ndim != 2:
            raise ValueError(f"frame must be 2-D, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("frame has non-finite pixels")
        if p.min() < 0 or p.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class SmaidConfig:
    """zeta frames per channel, beta channels, starting offset tau."""

    zeta: int = 15
    beta: int = 3
    tau: int = 0

    def __post_init__(self):
        if self.zeta < 2:
            raise ValueError("zeta must be >= 2 (a channel needs at least one difference)")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


@dataclass(frozen=True)
class SmaidImage:
    """Stack of motion channels; channel order is temporal order."""

    channels: tuple
    config: SmaidConfig

    def __post_init__(self):
        chans = tuple(np.asarray(c, dtype=float) for c in self.channels)
        if not chans:
            raise ValueError("need at least one channel")
        if any(c.shape != chans[0].shape for c in chans):
            raise ValueError("channels must share dimensions")
        for c in chans:
            c.setflags(write=False)
        object.__setattr__(self, "channels", chans)


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel box; x indexes columns, y indexes rows."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError("box corners must be ordered")


def to_gray(rgb: np.ndarray) -> GrayFrame:
    """Luma reduction 0.299 R + 0.587 G + 0.114 B, kept real-valued."""
    rgb = np.asarray(rgb, dtype=float)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (h, w, 3) frame, got shape {rgb.shape}")
    r, g, b = GRAY_WEIGHTS
    return GrayFrame(r * rgb[:, :, 0] + g * rgb[:, :, 1] + b * rgb[:, :, 2])


def _stack(frames) -> np.ndarray:
    pixels = [f.pixels if isinstance(f, GrayFrame) else np.asarray(f, dtype=float) for f in frames]
    if not pixels:
        raise ValueError("no frames")
    if any(p.shape != pixels[0].shape for p in pixels):
        raise ValueError("frames must share dimensions")
    return np.stack(pixels)


def maid(frames, tau: int, zeta: int) -> np.ndarray:
    """Mean of absolute consecutive-frame differences over frames
    tau .. tau+zeta-1 (0-based); stays within [0, 255] for valid frames."""
    if zeta < 2:
        raise ValueError("zeta must be >= 2")
    if tau < 0 or tau + zeta > len(frames):
        raise ValueError(
            f"window [{tau}, {tau + zeta}) exceeds the {len(frames)} available frames"
        )
    window = _stack(frames[tau : tau + zeta])
    return np.abs(np.diff(window, axis=0)).sum(axis=0) / (zeta - 1)


def smaid(frames, config: SmaidConfig = SmaidConfig()) -> SmaidImage:
    """Stack the motion summaries of beta consecutive non-overlapping windows
    of zeta frames each, starting at offset tau."""
    needed = config.tau + config.beta * config.zeta
    if len(frames) < needed:
        raise ValueError(f"need at least {needed} frames, got {len(frames)}")
    channels = tuple(
        maid(frames, config.tau + j * config.zeta, config.zeta) for j in range(config.beta)
    )
    return SmaidImage(channels, config)


# ---------------------------------------------------------------------------
# Action-window localization
# ---------------------------------------------------------------------------


def _box_blur(img: np.ndarray) -> np.ndarray:
    # 3x3 mean with zero padding outside the frame.
    h, w = img.shape
    pad = np.zeros((h + 2, w + 2))
    pad[1:-1, 1:-1] = img
    out = np.zeros((h, w))
    for dy in range(3):
        for dx in range(3):
            out += pad[dy : dy + h, dx : dx + w]
    return out / 9.0


def _dilate(mask: np.ndarray, radius: int, iters: int) -> np.ndarray:
    if radius < 1 or iters < 1:
        return mask
    h, w = mask.shape
    size = 2 * radius + 1
    for _ in range(iters):
        pad = np.zeros((h + 2 * radius, w + 2 * radius), dtype=bool)
        pad[radius : radius + h, radius : radius + w] = mask
        out = np.zeros((h, w), dtype=bool)
        for dy in range(size):
            for dx in range(size):
                out |= pad[dy : dy + h, dx : dx + w]
        mask = out
    return mask


def _components(mask: np.ndarray):
    """8-connected components as (rows, cols) index arrays."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    for sy, sx in zip(*np.nonzero(mask)):
        if seen[sy, sx]:
            continue
        stack = [(int(sy), int(sx))]
        seen[sy, sx] = True
        rows, cols = [], []
        while stack:
            y, x = stack.pop()
            rows.append(y)
            cols.append(x)
            for dy, dx in neighbors:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                    seen[ny, nx] = True
                    stack.append((ny, nx))
        yield np.array(rows), np.array(cols)


def localize(
    frames,
    diff_threshold: float = 12.0,
    dilate_radius: int = 1,
    dilate_iters: int = 2,
    min_component_area: int = 16,
) -> BoundingBox:
    """Tight box around all sufficiently large motion components.

    Per consecutive frame pair: binarize |f_i - f_{i-1}| >= diff_threshold,
    smooth with a 3x3 box blur (the blurred mask is re-binarized at > 0, which
    keeps one-pixel-wide motion ridges instead of despeckling them away), then
    dilate with a square element `dilate_iters` times. Components of at least
    `min_component_area` pixels, unioned over all pairs, define the box; a
    clip with no surviving motion falls back to the full frame.
    """
    stack = _stack(frames)
    if stack.shape[0] < 2:
        raise ValueError("need at least 2 frames")
    h, w = stack.shape[1:]
    y0, x0 = h, w
    y1, x1 = -1, -1
    found = False
    for i in range(1, stack.shape[0]):
        mask = np.abs(stack[i] - stack[i - 1]) >= diff_threshold
        if not mask.any():
            continue
        mask = _box_blur(mask.astype(float)) > 0
        mask = _dilate(mask, dilate_radius, dilate_iters)
        for rows, cols in _components(mask):
            if rows.size < min_component_area:
                continue
            found = True
            y0 = min(y0, int(rows.min()))
            y1 = max(y1, int(rows.max()))
            x0 = min(x0, int(cols.min()))
            x1 = max(x1, int(cols.max()))
    if not found:
        return BoundingBox(0, 0, w - 1, h - 1)
    return BoundingBox(x0, y0, x1, y1)


# ---------------------------------------------------------------------------
# Binary portable-anymap I/O (P5 grayscale, P6 RGB, maxval 255)
# ---------------------------------------------------------------------------


def _quantize(img: np.ndarray) -> np.ndarray:
    # Round half-up, then clip into the 8-bit range.
    return np.clip(np.floor(np.asarray(img, dtype=float) + 0.5), 0, 255).astype(np.uint8)


def read_pnm(path):
    """Read a binary PNM: P5 yields a GrayFrame, P6 an (h, w, 3) uint8 array."""
    raw = Path(path).read_bytes()
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(raw):
            c = raw[pos]
            if c in b" \t\r\n":
                pos += 1
            elif c == ord("#"):
                while pos < len(raw) and raw[pos] not in b"\r\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(raw) and raw[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header")
        return raw[start:pos]

    magic = token()
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported magic {magic!r} (expected P5 or P6)")
    width, height, maxval = int(token()), int(token()), int(token())
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval} (only 255)")
    pos += 1  # single whitespace byte before the payload
    depth = 1 if magic == b"P5" else 3
    expected = width * height * depth
    payload = raw[pos : pos + expected]
    if len(payload) != expected:
        raise ValueError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    data = np.frombuffer(payload, dtype=np.uint8)
    if magic == b"P5":
        return GrayFrame(data.reshape(height, width).astype(float))
    return data.reshape(height, width, 3).copy()


def write_pnm(image, path) -> None:
    """Write a GrayFrame / 2-D array as P5, or an (h, w, 3) array as P6."""
    if isinstance(image, GrayFrame):
        image = image.pixels
    arr = np.asarray(image)
    if arr.ndim == 2:
        data = _quantize(arr)
        header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        data = _quantize(arr)
        header = f"P6\n{arr.shape[1]} {arr.shape[0]}\n255\n"
    else:
        raise ValueError(f"cannot write shape {arr.shape} as PNM")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + data.tobytes())


def write_smaid(image: SmaidImage, path) -> list[Path]:
    """Export a motion stack: three channels go to one P6 file with the
    earliest window on the R plane; any other channel count goes to separate
    P5 files suffixed with the 1-based channel index. Returns written paths."""
    path = Path(path)
    if len(image.channels) == 3:
        rgb = np.stack(image.channels, axis=2)
        write_pnm(rgb, path)
        return [path]
    written = []
    for j, chan in enumerate(image.channels, start=1):
        target = path.with_name(f"{path.stem}_c{j}{path.suffix or '.pgm'}")
        write_pnm(chan, target)
        written.append(target)
    return written


def read_frames_dir(directory) -> list[GrayFrame]:
    """Read a directory of PNM frames in lexicographic name order, converting
    RGB frames to grayscale."""
    directory = Path(directory)
    paths = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm")
    )
    if not paths:
        raise ValueError(f"{directory}: no .pgm/.ppm/.pnm frames")
    frames = []
    for p in paths:
        img = read_pnm(p)
        frames.append(img if isinstance(img, GrayFrame) else to_gray(img))
    return frames
