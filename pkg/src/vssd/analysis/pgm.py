"""Dependency-free binary PGM (P5) and PPM (P6) image I/O."""

from __future__ import annotations

import numpy as np


def to_uint8(grid):
    """Map a float array in [0, 1] to uint8 grey levels."""
    a = np.asarray(grid, dtype=np.float64)
    if a.size and (a.min() < -1e-9 or a.max() > 1.0 + 1e-9):
        raise ValueError(f"grid values must lie in [0, 1], got [{a.min()}, {a.max()}]")
    return np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, grid):
    """Write a 2-D array as binary PGM; floats in [0, 1] are scaled to 0..255."""
    a = np.asarray(grid)
    if a.ndim != 2:
        raise ValueError(f"PGM expects a 2-D grid, got shape {a.shape}")
    if a.dtype != np.uint8:
        a = to_uint8(a)
    h, w = a.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(a.tobytes())


def write_ppm(path, rgb):
    """Write an (H, W, 3) array as binary PPM."""
    a = np.asarray(rgb)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"PPM expects (H, W, 3), got shape {a.shape}")
    if a.dtype != np.uint8:
        a = to_uint8(a)
    h, w, _ = a.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(a.tobytes())


def _read_header(f, magic):
    """Parse the whitespace/comment-tolerant PNM header after the magic."""
    if f.read(2) != magic:
        raise ValueError(f"not a {magic.decode()} file")
    fields = []
    while len(fields) < 3:
        tok = b""
        ch = f.read(1)
        while ch.isspace():
            ch = f.read(1)
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = f.read(1)
            continue
        while ch and not ch.isspace():
            tok += ch
            ch = f.read(1)
        if not tok:
            raise ValueError("truncated header")
        fields.append(int(tok))
    return fields  # width, height, maxval


def read_pgm(path):
    with open(path, "rb") as f:
        w, h, maxval = _read_header(f, b"P5")
        if maxval != 255:
            raise ValueError(f"only maxval 255 supported, got {maxval}")
        data = f.read(w * h)
    if len(data) != w * h:
        raise ValueError(f"expected {w * h} pixel bytes, got {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def read_ppm(path):
    with open(path, "rb") as f:
        w, h, maxval = _read_header(f, b"P6")
        if maxval != 255:
            raise ValueError(f"only maxval 255 supported, got {maxval}")
        data = f.read(w * h * 3)
    if len(data) != w * h * 3:
        raise ValueError(f"expected {w * h * 3} pixel bytes, got {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)
