"""
imageio - PGM images and raw tensor files

Two formats are supported:

- Netpbm graymaps, ASCII (P2) or binary (P5), with maxval up to 65535.
  Binary samples are one byte when maxval < 256 and two big-endian bytes
  otherwise. Images are written 8-bit.

- Tensor files: the ASCII header line "NDTENSOR <ndim> <d_1> ... <d_n>\\n"
  followed by the values as little-endian IEEE-754 doubles, first index
  slowest.
"""

# =============================================================================
# Imports
# =============================================================================
import math
import os
import sys

import numpy as np

from ndecon.errors import (
    FormatError,
    LengthMismatchError,
    ShapeError,
    TruncatedDataError,
)
from ndecon.tensor import freeze

TENSOR_MAGIC = "NDTENSOR"

_WHITESPACE = b" \t\n\r\v\f"


# =============================================================================
# PGM
# =============================================================================
def _next_token(data, pos):
    """Return the next whitespace-delimited header token and the position after it"""
    n = len(data)
    while pos < n:
        if data[pos] in _WHITESPACE:
            pos += 1
        elif data[pos] == ord("#"):
            # Comments run to the end of the line
            while pos < n and data[pos] not in b"\n\r":
                pos += 1
        else:
            break
    if pos >= n:
        raise TruncatedDataError("the PGM header ends early")
    start = pos
    while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
        pos += 1
    return bytes(data[start:pos]), pos


def _parse_int(token, what):
    if not token.isdigit():
        raise FormatError(f"invalid PGM {what}: {token!r}")
    return int(token)


def decode_pgm(data):
    """
    Decode the bytes of a P2 or P5 graymap

    Returns
    -------
    image : np.ndarray (read-only) [height, width], values in 0..maxval
    """
    if len(data) < 2:
        raise TruncatedDataError("the PGM header ends early")
    magic = bytes(data[:2])
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"not a PGM file (magic {magic!r})")
    if len(data) > 2 and data[2] not in _WHITESPACE and data[2:3] != b"#":
        raise FormatError("the PGM magic must be followed by whitespace")

    pos = 2
    width, pos = _next_token(data, pos)
    height, pos = _next_token(data, pos)
    maxval, pos = _next_token(data, pos)
    width = _parse_int(width, "width")
    height = _parse_int(height, "height")
    maxval = _parse_int(maxval, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"invalid PGM size {width}x{height}")
    if not 0 < maxval <= 65535:
        raise FormatError(f"PGM maxval must lie in 1..65535, got {maxval}")
    npixels = width * height

    if magic == b"P5":
        # Exactly one whitespace byte separates the header from the samples
        if pos >= len(data):
            raise TruncatedDataError("the PGM payload is missing")
        pos += 1
        dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
        payload = data[pos:]
        expected = npixels * dtype.itemsize
        if len(payload) < expected:
            raise TruncatedDataError(
                f"PGM payload has {len(payload)} bytes, expected {expected}"
            )
        elif len(payload) > expected:
            raise LengthMismatchError(
                f"PGM payload has {len(payload)} bytes, expected {expected}"
            )
        values = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    else:
        tokens = bytes(data[pos:]).split()
        if len(tokens) < npixels:
            raise TruncatedDataError(
                f"PGM has {len(tokens)} samples, expected {npixels}"
            )
        elif len(tokens) > npixels:
            raise LengthMismatchError(
                f"PGM has {len(tokens)} samples, expected {npixels}"
            )
        values = np.array([_parse_int(t, "sample") for t in tokens], dtype=np.float64)

    if np.any(values > maxval):
        raise FormatError(f"PGM sample exceeds maxval {maxval}")
    return freeze(values.reshape((height, width)))


def encode_pgm(t, clamp=True, binary=True):
    """
    Encode a 2-d tensor as an 8-bit graymap

    Values are rounded half to even. With clamp=True they are clipped to
    [0, 255]; otherwise values outside that range are an error.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2:
        raise ShapeError(f"a PGM image must be 2-d, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise FormatError("cannot write non-finite values to a PGM image")
    values = np.rint(t)
    if clamp:
        values = np.clip(values, 0.0, 255.0)
    elif np.any(values < 0.0) or np.any(values > 255.0):
        raise FormatError("image values lie outside [0, 255]; use clamp=True")
    values = values.astype(np.uint8)

    height, width = values.shape
    if binary:
        header = f"P5\n{width} {height}\n255\n".encode("ascii")
        return header + values.tobytes()
    lines = [f"P2\n{width} {height}\n255"]
    for row in values:
        lines.append(" ".join(str(v) for v in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def read_pgm(filename):
    """Read a P2 or P5 graymap as a tensor of shape (height, width)"""
    with open(filename, "rb") as fp:
        data = fp.read()
    return decode_pgm(data)


def write_pgm(t, filename, clamp=True, binary=True):
    """
    Write a 2-d tensor as an 8-bit graymap

    Parameters
    ----------
    t : np.ndarray (2D, float)
        Image values

    filename : str
        Output file name

    clamp : bool
        Clip to [0, 255] instead of raising on out-of-range values

    binary : bool
        Write P5 (binary) rather than P2 (ASCII)
    """
    data = encode_pgm(t, clamp=clamp, binary=binary)
    with open(filename, "wb") as fp:
        fp.write(data)
    return


# =============================================================================
# Tensor files
# =============================================================================
def decode_tensor(data):
    """Decode the bytes of a tensor file"""
    end = data.find(b"\n")
    if end < 0:
        raise TruncatedDataError("the tensor header has no terminating newline")
    try:
        tokens = data[:end].decode("ascii").split(" ")
    except UnicodeDecodeError:
        raise FormatError("the tensor header is not ASCII")
    if tokens[0] != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {tokens[0]!r}")
    if len(tokens) < 2 or not tokens[1].isdigit():
        raise FormatError("the tensor header has no dimension count")
    ndim = int(tokens[1])
    if ndim < 1:
        raise FormatError("a tensor needs at least one dimension")
    if len(tokens) != 2 + ndim or not all(d.isdigit() for d in tokens[2:]):
        raise FormatError(f"the tensor header does not list {ndim} extents")
    shape = tuple(int(d) for d in tokens[2:])
    if min(shape) < 1:
        raise FormatError(f"every tensor extent must be >= 1, got {shape}")

    count = math.prod(shape)
    if count > sys.maxsize // 8:
        raise FormatError(f"tensor shape {shape} has too many elements")

    payload = data[end + 1 :]
    expected = 8 * count
    if len(payload) < expected:
        raise TruncatedDataError(
            f"tensor payload has {len(payload)} bytes, expected {expected}"
        )
    elif len(payload) > expected:
        raise LengthMismatchError(
            f"tensor payload has {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FormatError("tensor file contains non-finite values")
    return freeze(values.reshape(shape))


def encode_tensor(t):
    """Encode a tensor as header line plus little-endian doubles"""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1:
        raise ShapeError("a tensor needs at least one dimension")
    dims = " ".join(str(d) for d in t.shape)
    header = f"{TENSOR_MAGIC} {t.ndim} {dims}\n".encode("ascii")
    return header + np.ascontiguousarray(t, dtype="<f8").tobytes(order="C")


def read_tensor(filename):
    with open(filename, "rb") as fp:
        data = fp.read()
    return decode_tensor(data)


def write_tensor(t, filename):
    data = encode_tensor(t)
    with open(filename, "wb") as fp:
        fp.write(data)
    return


# =============================================================================
# Dispatch on the file extension
# =============================================================================
def is_pgm(filename):
    return os.path.splitext(filename)[1].lower() == ".pgm"


def read_any(filename):
    """Read a .pgm image or, for any other extension, a tensor file"""
    if is_pgm(filename):
        return read_pgm(filename)
    return read_tensor(filename)


def write_any(t, filename, clamp=True):
    """Write a .pgm image or, for any other extension, a tensor file"""
    if is_pgm(filename):
        write_pgm(t, filename, clamp=clamp)
    else:
        write_tensor(t, filename)
    return
