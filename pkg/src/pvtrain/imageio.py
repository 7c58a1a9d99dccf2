"""Image files, synthetic test images and seeded Gaussian noise.

Two formats are supported, chosen by file suffix:

``.pgm``
    Binary PGM (P5), 8- or 16-bit. Pixel values map linearly to [0, 1];
    writing clamps to [0, 1] and rounds to the nearest level.
``.pvf``
    Lossless raster: magic ``b"PVF1"``, width and height as little-endian
    uint32, then ``width * height`` little-endian float64 values in
    row-major order.

Noise comes from numpy's Philox counter-based generator keyed by the seed,
so a seed yields the same noise on every platform numpy supports.
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import check_image

PVF_MAGIC = b"PVF1"
SYNTH_KINDS = ("disk", "squares", "ramp")


def atomic_write_bytes(path, data):
    """Write ``data`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_pvf(img):
    u = check_image(img)
    h, w = u.shape
    return PVF_MAGIC + struct.pack("<II", w, h) + u.astype("<f8").tobytes()


def decode_pvf(data):
    if data[:4] != PVF_MAGIC:
        raise ValueError("not a PVF1 file")
    w, h = struct.unpack("<II", data[4:12])
    payload = data[12:]
    if len(payload) != 8 * w * h:
        raise ValueError(f"PVF1 payload has {len(payload)} bytes, expected {8 * w * h}")
    return np.frombuffer(payload, dtype="<f8").reshape(h, w).astype(np.float64)


def _pgm_tokens(data, count):
    # Header tokens separated by whitespace, '#' comments to end of line.
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates header and raster
    return tokens, pos + 1


def decode_pgm(data):
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ValueError(f"unsupported PGM magic {tokens[0]!r}; only binary P5")
    w, h, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 65536:
        raise ValueError(f"bad PGM maxval {maxval}")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    raster = data[offset : offset + w * h * dtype.itemsize]
    if len(raster) != w * h * dtype.itemsize:
        raise ValueError("truncated PGM raster")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.float64) / maxval


def encode_pgm(img, bits=16):
    u = check_image(img)
    if bits not in (8, 16):
        raise ValueError("PGM depth must be 8 or 16 bits")
    maxval = 255 if bits == 8 else 65535
    levels = np.rint(np.clip(u, 0.0, 1.0) * maxval)
    raster = levels.astype("u1" if bits == 8 else ">u2").tobytes()
    h, w = u.shape
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + raster


def read_image(path):
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".pgm":
        return decode_pgm(data)
    if path.suffix.lower() == ".pvf":
        return decode_pvf(data)
    raise ValueError(f"unknown image format for {path}; use .pgm or .pvf")


def write_image(path, img, bits=16):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        data = encode_pgm(img, bits)
    elif suffix == ".pvf":
        data = encode_pvf(img)
    else:
        raise ValueError(f"unknown image format for {path}; use .pgm or .pvf")
    atomic_write_bytes(path, data)


def synth(kind, width, height=None):
    """Deterministic test image with values in [0, 1].

    ``disk``
        1 where ``(j - cx)^2 + (i - cy)^2 <= r^2`` and 0 elsewhere, with
        ``cx = (width - 1) / 2``, ``cy = (height - 1) / 2`` and
        ``r = min(width, height) / 4``.
    ``squares``
        background 0; a square of value 0.5 over rows and columns
        ``[h/8, h/2)`` x ``[w/8, w/2)`` and a square of value 1 over
        ``[h/2, 7h/8)`` x ``[w/2, 7w/8)`` (integer division).
    ``ramp``
        ``u(i, j) = j / (width - 1)``.
    """
    height = width if height is None else height
    if width < 2 or height < 2:
        raise ValueError("synthetic images need at least 2x2 pixels")
    i, j = np.mgrid[:height, :width].astype(np.float64)
    if kind == "disk":
        cx, cy, r = (width - 1) / 2, (height - 1) / 2, min(width, height) / 4
        return ((j - cx) ** 2 + (i - cy) ** 2 <= r * r).astype(np.float64)
    if kind == "squares":
        u = np.zeros((height, width))
        u[height // 8 : height // 2, width // 8 : width // 2] = 0.5
        u[height // 2 : 7 * height // 8, width // 2 : 7 * width // 8] = 1.0
        return u
    if kind == "ramp":
        return j / (width - 1)
    raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTH_KINDS}")


def gaussian_noise(shape, sigma, seed):
    """``sigma`` times standard normals from ``Philox(seed)``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.Generator(np.random.Philox(seed))
    return sigma * rng.standard_normal(shape)


def add_noise(img, sigma, seed):
    """Add seeded Gaussian noise; values are not clamped."""
    u = check_image(img)
    if sigma == 0:
        return u.copy()
    return u + gaussian_noise(u.shape, sigma, seed)


def desk_pair(size=32, sigma=0.1, seed=0):
    """The standard synthetic training pair: a disk and its noisy copy."""
    clean = synth("disk", size)
    return clean, add_noise(clean, sigma, seed)
