"""File formats: SMAV video containers, PGM frame directories, CSV and JSON output.

SMAV layout (little-endian)::

    bytes 0-3   magic b"SMAV"
    u32         version (= 1)
    u32 x 4     N, C, H, W
    f32 x N*C*H*W  payload in (n, c, y, x) order
"""

import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .tensor import as_video

MAGIC = b"SMAV"
VERSION = 1
_HEADER = struct.Struct("<4s5I")


class LoadError(Exception):
    """Base class for video loading failures."""


class BadMagicError(LoadError):
    pass


class BadVersionError(LoadError):
    pass


class TruncatedError(LoadError):
    pass


class PgmError(LoadError):
    """Malformed PGM file or frames with inconsistent dimensions."""


def save_video(video, path):
    v = as_video(video, min_frames=2)
    payload = v.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValueError("values overflow 32-bit float storage")
    n, c, h, w = v.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, c, h, w))
        fh.write(payload.tobytes(order="C"))


def load_video(path):
    """Load an SMAV file, or a directory of binary 8-bit PGM frames.

    PGM frames are read in lexicographic filename order and scaled to [0, 1].
    """
    path = Path(path)
    if path.is_dir():
        return _load_pgm_dir(path)
    data = path.read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an SMAV file (magic {data[:4]!r})")
    if len(data) < _HEADER.size:
        raise TruncatedError(f"{path}: truncated header")
    _, version, n, c, h, w = _HEADER.unpack_from(data)
    if version != VERSION:
        raise BadVersionError(f"{path}: unsupported SMAV version {version}")
    count = n * c * h * w
    expected = _HEADER.size + 4 * count
    if len(data) < expected:
        raise TruncatedError(
            f"{path}: payload has {len(data) - _HEADER.size} bytes, expected {4 * count}")
    if len(data) > expected:
        raise LoadError(f"{path}: {len(data) - expected} trailing bytes after payload")
    if n < 2 or min(c, h, w) < 1:
        raise LoadError(f"{path}: invalid dimensions N={n} C={c} H={h} W={w}")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=_HEADER.size)
    if not np.all(np.isfinite(values)):
        raise LoadError(f"{path}: payload contains non-finite values")
    return values.astype(np.float64).reshape(n, c, h, w)


def _read_pgm(path):
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    # magic, width, height, maxval; '#' comments allowed between tokens
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    if tokens[0] != b"P5":
        raise PgmError(f"{path}: only binary P5 PGM is supported, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PgmError(f"{path}: non-integer PGM header field") from None
    if maxval != 255:
        raise PgmError(f"{path}: only 8-bit PGM (maxval 255) is supported")
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise PgmError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _load_pgm_dir(path):
    files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".pgm")
    if len(files) < 2:
        raise LoadError(f"{path}: need at least 2 PGM frames, found {len(files)}")
    frames = [_read_pgm(f) for f in files]
    shape = frames[0].shape
    for f, fr in zip(files, frames):
        if fr.shape != shape:
            raise PgmError(f"{f}: frame size {fr.shape} differs from {shape}")
    return np.stack(frames)[:, None].astype(np.float64) / 255.0


def write_pgm(frame, path):
    """Write one 2D frame with values in [0, 1] as an 8-bit binary PGM."""
    arr = np.clip(np.rint(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


def fmt_float(x):
    """Format a float at 17 significant digits (round-trip exact)."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return "%.17g" % x


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent=2):
    """JSON text with every float printed at 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_text(text, path):
    """Write ``text`` to ``path``, or to stdout when ``path`` is ``"-"``."""
    if str(path) == "-":
        import sys
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_float(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"
