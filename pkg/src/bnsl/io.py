"""Raw tensor files and 8-bit PGM previews."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"BNSL-TENSOR\x00\x00\x00\x00\x00"
_HEADER = struct.Struct("<5I")


def _dims5(shape) -> tuple[int, int, int, int, int]:
    if len(shape) == 4:
        b, c, h, w = shape
        return b, c, 1, h, w
    if len(shape) == 5:
        return tuple(shape)
    raise ValueError(f"tensor files hold 4-D or 5-D latents, got shape {shape}")


def encode_tensor(x: np.ndarray) -> bytes:
    x = np.asarray(x)
    dims = _dims5(x.shape)
    data = np.ascontiguousarray(x, dtype="<f4")
    return MAGIC + _HEADER.pack(*dims) + data.tobytes()


def decode_tensor(raw: bytes, squeeze_frames: bool = True) -> np.ndarray:
    """Parse a tensor file's bytes.

    Images are stored with ``f = 1``; with `squeeze_frames` such tensors come
    back 4-D. Values are returned as float32, exactly as stored.
    """
    head = len(MAGIC) + _HEADER.size
    if len(raw) < head or raw[: len(MAGIC)] != MAGIC:
        raise ValueError("not a BNSL tensor file (bad magic)")
    dims = _HEADER.unpack(raw[len(MAGIC) : head])
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) != head + 4 * count:
        raise ValueError(f"payload size mismatch for dims {dims}")
    data = np.frombuffer(raw, dtype="<f4", offset=head).reshape(dims)
    if squeeze_frames and dims[2] == 1:
        data = data[:, :, 0]
    return data.astype(np.float32)


def save_tensor(path, x: np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(x))


def load_tensor(path, squeeze_frames: bool = True) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes(), squeeze_frames)


def write_pgm(path, image: np.ndarray) -> tuple[float, float]:
    """Write a 2-D array as binary P5 PGM with min-max normalization.

    Returns the ``(min, max)`` used so callers can record it.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"PGM preview needs a 2-D slice, got {image.shape}")
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        scaled = np.round((image - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(image)
    pixels = scaled.astype(np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())
    return lo, hi


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)
