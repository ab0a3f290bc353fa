"""Latent arrays, seeded noise streams and the interpolation primitive.

Latents are plain float64 numpy arrays shaped ``(b, c, h, w)`` for images or
``(b, c, f, h, w)`` for video. Every spatial operation in the package acts on
the last two axes, so the frame axis behaves like an extra batch axis.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


class ShapeError(ValueError):
    """Raised for degenerate or mismatched latent shapes."""


def check_shape(shape) -> tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if len(shape) not in (1, 2, 3, 4, 5):
        raise ShapeError(f"expected 1 to 5 dimensions, got shape {shape}")
    if any(s < 1 for s in shape):
        raise ShapeError(f"all dimensions must be >= 1, got shape {shape}")
    return shape


def as_latent(x) -> np.ndarray:
    """Return `x` as a float64 array, rejecting empty or non-finite input."""
    arr = np.asarray(x, dtype=np.float64)
    check_shape(arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("latent contains non-finite values")
    return arr


def spatial_shape(x: np.ndarray) -> tuple[int, int]:
    if x.ndim < 2:
        raise ShapeError(f"latent needs at least two spatial axes, got {x.shape}")
    return x.shape[-2], x.shape[-1]


def _mix64(z: int) -> int:
    # splitmix64 finalizer
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _label_id(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """A named stream of a counter-based generator.

    The pair ``(seed, stream_id)`` is used as the 128-bit Philox key, so two
    streams with different ids never overlap and a stream's draws do not
    depend on how much any other stream has been consumed.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def spawn(self, *path) -> "RngStream":
        """Derive a child stream, e.g. ``run.spawn(stage, "eta")``."""
        sid = self.stream_id
        for label in path:
            sid = _mix64(sid ^ _mix64(_label_id(label)))
        return RngStream(self.seed, sid)

    def generator(self) -> np.random.Generator:
        key = self.seed | (self.stream_id << 64)
        return np.random.Generator(np.random.Philox(key=key))


def sample_noise(shape, rng: RngStream) -> np.ndarray:
    """I.i.d. standard normal latent, reproducible under ``(seed, stream_id)``."""
    shape = check_shape(shape)
    return rng.generator().standard_normal(shape)


def lerp(a, b, t: float) -> np.ndarray:
    """Blend ``(1 - t) * a + t * b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return a.copy()
    if t == 1.0:
        return b.copy()
    # this form keeps lerp(a, a, t) == a exactly
    return a + t * (b - a)
