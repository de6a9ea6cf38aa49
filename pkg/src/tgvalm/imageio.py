"""PGM reading/writing, seeded Gaussian noise and synthetic test images."""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np


class PGMError(ValueError):
    pass


# -- PGM ------------------------------------------------------------------

_SPACE = re.compile(rb"\s+")
_WORD = re.compile(rb"\S+")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    tokens, pos = [], 0
    for _ in range(count):
        while True:
            m = _SPACE.match(data, pos)
            if m:
                pos = m.end()
            if data[pos:pos + 1] != b"#":
                break
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PGMError("unterminated comment in PGM header")
            pos = nl + 1
        m = _WORD.match(data, pos)
        if not m:
            raise PGMError("truncated PGM header")
        tokens.append(m.group(0))
        pos = m.end()
    return tokens, pos


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode P2 or P5 bytes to a float image scaled to ``[0, 1]`` by maxval."""
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise PGMError(f"unsupported magic {data[:2]!r}; expected P2 or P5")
    magic = data[:2]
    try:
        (w, h, maxval), pos = _header_tokens(data[2:], 3)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PGMError(f"malformed PGM header: {exc}") from None
    pos += 2
    if width < 1 or height < 1:
        raise PGMError(f"invalid dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise PGMError(f"invalid maxval {maxval}")
    n = width * height
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos:pos + n * dtype.itemsize]
        if len(raw) < n * dtype.itemsize:
            raise PGMError(f"truncated raster: expected {n * dtype.itemsize} bytes, got {len(raw)}")
        values = np.frombuffer(raw, dtype=dtype).astype(float)
    else:
        try:
            values = np.array([int(t) for t in data[pos:].split()], dtype=float)
        except ValueError:
            raise PGMError("non-integer sample in P2 raster") from None
        if values.size < n:
            raise PGMError(f"truncated raster: expected {n} samples, got {values.size}")
        values = values[:n]
    if values.max(initial=0) > maxval:
        raise PGMError("sample exceeds maxval")
    return values.reshape(height, width) / maxval


def load_image(path: str | Path) -> np.ndarray:
    return parse_pgm(Path(path).read_bytes())


def encode_pgm(u: np.ndarray, maxval: int = 255, binary: bool = True) -> bytes:
    """Encode ``u`` (nominally in ``[0, 1]``) with round-half-up quantization."""
    if not 0 < maxval < 65536:
        raise PGMError(f"invalid maxval {maxval}")
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise PGMError(f"expected a 2-D image, got shape {u.shape}")
    levels = np.floor(np.clip(u, 0.0, 1.0) * maxval + 0.5).astype(np.int64)
    height, width = u.shape
    header = f"{'P5' if binary else 'P2'}\n{width} {height}\n{maxval}\n".encode()
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        return header + levels.astype(dtype).tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in levels)
    return header + rows.encode() + b"\n"


def save_image(path: str | Path, u: np.ndarray, maxval: int = 255, binary: bool = True) -> None:
    Path(path).write_bytes(encode_pgm(u, maxval, binary))


# -- PCG32 + Box-Muller ---------------------------------------------------

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005


class PCG32:
    """O'Neill's PCG32 (XSH-RR output, 64-bit LCG state)."""

    def __init__(self, seed: int, stream: int = 54):
        self.state = 0
        self.inc = ((stream << 1) | 1) & _MASK64
        self.next_u32()
        self.state = (self.state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self.state
        self.state = (old * _MULT + self.inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def uniform(self) -> float:
        """Uniform double in the open interval (0, 1)."""
        return (self.next_u32() + 0.5) / 4294967296.0

    def normals(self, count: int) -> np.ndarray:
        out = np.empty(count)
        i = 0
        while i < count:
            r = math.sqrt(-2.0 * math.log(self.uniform()))
            theta = 2.0 * math.pi * self.uniform()
            out[i] = r * math.cos(theta)
            if i + 1 < count:
                out[i + 1] = r * math.sin(theta)
            i += 2
        return out


def noise_std(u: np.ndarray, percent: float) -> float:
    """``percent`` of the dynamic range of ``u``; a constant image uses the nominal range 1."""
    span = float(np.max(u) - np.min(u))
    return percent / 100.0 * (span if span > 0 else 1.0)


def add_gaussian_noise(u: np.ndarray, percent: float | None = None, seed: int = 0,
                       std: float | None = None) -> np.ndarray:
    """Add i.i.d. Gaussian noise drawn in row-major order; the result is not clamped.

    Give either ``percent`` (of the dynamic range) or an absolute ``std``.
    """
    u = np.asarray(u, dtype=float)
    if std is None:
        if percent is None or not percent > 0:
            raise ValueError("noise percent must be positive")
        std = noise_std(u, percent)
    elif not std > 0:
        raise ValueError("noise std must be positive")
    noise = PCG32(seed).normals(u.size).reshape(u.shape)
    return u + std * noise


# -- synthetic images -----------------------------------------------------

def nested_squares(size: int = 64) -> np.ndarray:
    """Piecewise-constant test image: two nested squares on a flat background."""
    img = np.full((size, size), 0.2)
    o, i = size // 5, (3 * size) // 8
    img[o:size - o, o:size - o] = 0.5
    img[i:size - i, i:size - i] = 0.8
    return img


def synthetic_image(kind: str, size: int = 64) -> np.ndarray:
    if size < 1:
        raise ValueError("size must be positive")
    if kind == "squares":
        return nested_squares(size)
    if kind == "constant":
        return np.full((size, size), 0.5)
    if kind == "ramp":
        y, x = np.mgrid[0:size, 0:size] / max(size - 1, 1)
        return 0.1 + 0.4 * x + 0.3 * y
    raise ValueError(f"unknown synthetic image {kind!r}; use squares, constant or ramp")


def acceptance_instance(size: int = 64, percent: float = 10.0, seed: int = 42):
    """``(clean, noisy)`` pair used by the test and benchmark suites."""
    clean = nested_squares(size)
    return clean, add_gaussian_noise(clean, percent, seed)
