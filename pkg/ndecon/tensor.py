"""
tensor - dense n-dimensional real arrays for ndecon

A tensor is a C-contiguous, read-only numpy array of 64-bit floats. The
C (row-major) layout is the vectorization used throughout the package: the
first index varies slowest, so the vectorized tensor is the concatenation of
the vectorized slices taken along the first dimension. This is the block
partition the convolution matrix is built on.
"""

# =============================================================================
# Imports
# =============================================================================
import numpy as np

from ndecon.errors import BoundsError, FormatError, ShapeError

# Guard for divisions by (nearly) zero denominators
EPS_DIV = 1e-12


# =============================================================================
# Construction
# =============================================================================
def check_shape(extents):
    """
    Validate a shape and return it as a tuple of Python ints

    Parameters
    ----------
    extents : sequence of int
        Extent (d_1, ..., d_n) of each dimension

    Returns
    -------
    shape : tuple of int
    """
    try:
        shape = tuple(int(d) for d in extents)
    except TypeError:
        shape = (int(extents),)
    if len(shape) < 1:
        raise ShapeError("a shape needs at least one dimension")
    for d in shape:
        if d < 1:
            raise ShapeError(f"every extent must be >= 1, got {shape}")
    return shape


def freeze(arr):
    """Mark an array produced inside the package read-only and return it"""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def as_tensor(data, shape=None, check_finite=True):
    """
    Create a tensor from external data

    Parameters
    ----------
    data : array_like
        Nested sequence or array of real values, or a flat sequence when
        shape is given

    shape : sequence of int or None
        Shape used to devectorize a flat sequence

    check_finite : bool
        Reject NaN or Inf values

    Returns
    -------
    t : np.ndarray (float64, read-only)
    """
    arr = np.array(data, dtype=np.float64, copy=True)
    if shape is not None:
        shape = check_shape(shape)
        if arr.size != int(np.prod(shape)):
            raise ShapeError(
                f"{arr.size} values cannot fill a tensor of shape {shape}"
            )
        arr = arr.reshape(shape)
    if arr.ndim == 0:
        arr = arr.reshape((1,))
    check_shape(arr.shape)
    if check_finite and not np.all(np.isfinite(arr)):
        raise FormatError("tensor values must be finite")
    return freeze(arr)


def zeros(shape):
    """Return the zero tensor of the given shape"""
    return freeze(np.zeros(check_shape(shape)))


# =============================================================================
# Indexing and vectorization
# =============================================================================
def flat_index(idx, shape):
    """
    Position of a multi-index in the vectorized tensor, idx_1 most significant
    """
    shape = check_shape(shape)
    idx = tuple(int(i) for i in idx)
    if len(idx) != len(shape):
        raise BoundsError(f"index {idx} has the wrong length for shape {shape}")
    for i, d in zip(idx, shape):
        if i < 0 or i >= d:
            raise BoundsError(f"index {idx} is out of bounds for shape {shape}")
    return int(np.ravel_multi_index(idx, shape, order="C"))


def at(t, idx):
    """Return the element of t at the multi-index idx"""
    return float(t.reshape(-1)[flat_index(idx, t.shape)])


def vectorize(t):
    """Return the values of t as a flat array, first index slowest"""
    return freeze(np.asarray(t, dtype=np.float64).reshape(-1, order="C"))


def devectorize(v, shape):
    """Inverse of vectorize() for the given shape"""
    v = np.asarray(v, dtype=np.float64)
    shape = check_shape(shape)
    if v.ndim != 1 or v.size != int(np.prod(shape)):
        raise ShapeError(f"a vector of length {v.size} does not match {shape}")
    return freeze(v.reshape(shape, order="C"))


# =============================================================================
# Elementwise operations
# =============================================================================
def _check_same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ShapeError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def add(a, b):
    _check_same_shape(a, b)
    return freeze(np.add(a, b))


def sub(a, b):
    _check_same_shape(a, b)
    return freeze(np.subtract(a, b))


def mul(a, b):
    _check_same_shape(a, b)
    return freeze(np.multiply(a, b))


def guarded_div(a, b, eps=EPS_DIV):
    """a / b elementwise, with 0 wherever |b| < eps"""
    _check_same_shape(a, b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    safe = np.abs(b) >= eps
    out = np.zeros(a.shape)
    np.divide(a, b, out=out, where=safe)
    return freeze(out)


def scale(a, alpha):
    return freeze(float(alpha) * np.asarray(a, dtype=np.float64))


def clamp_below_zero(a):
    """max{a, 0} elementwise"""
    return freeze(np.maximum(a, 0.0))


_BINARY_OPS = {"add": add, "sub": sub, "mul": mul, "guarded-div": guarded_div}
_UNARY_OPS = {"clamp-below-zero": clamp_below_zero}


def elementwise(op, a, b=None, alpha=None):
    """
    Apply one of the named elementwise operations

    Parameters
    ----------
    op : str in ('add', 'sub', 'mul', 'guarded-div', 'scale', 'clamp-below-zero')
        Operation name

    a, b : np.ndarray
        Operands; b is required by the binary operations

    alpha : float
        Factor for 'scale'
    """
    if op in _BINARY_OPS:
        if b is None:
            raise ShapeError(f"'{op}' needs two operands")
        return _BINARY_OPS[op](a, b)
    elif op in _UNARY_OPS:
        return _UNARY_OPS[op](a)
    elif op == "scale":
        return scale(a, alpha)
    raise ValueError(f"unknown elementwise operation '{op}'")


def inner(a, b):
    """Euclidean inner product of two tensors of the same shape"""
    _check_same_shape(a, b)
    return float(np.dot(np.ravel(a), np.ravel(b)))
