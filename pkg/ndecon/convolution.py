"""
convolution - full n-dimensional discrete convolution and its adjoint

For an input x with extents d_i = m_i + 1 and a kernel h with odd extents
2p_i + 1, the full convolution

    y(s) = sum_k x(k) h(s - k),    k_i = 0, ..., m_i

has extents d_i + 2p_i, with h taken as zero outside its support. The
transpose of the corresponding matrix is applied without forming it: the
kernel is flipped, the observation is convolved with it, and the central
block of the (d_i + 4p_i)-sized result is kept by the crop operator M.
"""

# =============================================================================
# Imports
# =============================================================================
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ndecon.errors import DegenerateOperatorError, FormatError, ShapeError
from ndecon.tensor import check_shape, freeze

logger = logging.getLogger(__name__)

# Number of worker threads used by conv_full()
_num_threads = 1

# Output rows below which a convolution is never split across threads
_MIN_ROWS_PER_THREAD = 16


def set_num_threads(n):
    """
    Cap the number of threads conv_full() may use. Results do not depend on
    the thread count: every output element accumulates the kernel taps in
    the same order whichever thread computes it.
    """
    global _num_threads
    n = int(n)
    if n < 1:
        raise ValueError("the number of threads must be >= 1")
    _num_threads = n
    return


def get_num_threads():
    return _num_threads


# =============================================================================
# Kernel
# =============================================================================
class Kernel:
    """
    Convolution kernel (point spread function) with odd extents 2p_i + 1

    The kernel values are stored as a read-only float64 array; the radii
    p_i = (k_i - 1) / 2 are derived from the extents.
    """

    def __init__(self, values):
        """
        Parameters
        ----------
        values : array_like
            Kernel values; every extent must be odd
        """
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim == 0:
            arr = arr.reshape((1,))
        check_shape(arr.shape)
        for k in arr.shape:
            if k % 2 != 1:
                raise ShapeError(
                    f"kernel extents must be odd (2p + 1), got {arr.shape}"
                )
        if not np.all(np.isfinite(arr)):
            raise FormatError("kernel values must be finite")
        self.values = freeze(arr)
        self.radii = tuple((k - 1) // 2 for k in arr.shape)
        return

    @classmethod
    def delta(cls, radii):
        """Centered unit impulse with the given radii"""
        shape = tuple(2 * p + 1 for p in radii)
        values = np.zeros(shape)
        values[tuple(radii)] = 1.0
        return cls(values)

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def total(self):
        """Sum of all kernel entries"""
        return float(np.sum(self.values))

    def is_zero(self):
        return not np.any(self.values)

    def is_nonnegative(self):
        return bool(np.all(self.values >= 0.0))

    def normalized(self):
        """Return the kernel scaled so that its entries sum to one"""
        s = self.total()
        if s == 0.0:
            raise DegenerateOperatorError("a kernel summing to zero can't be normalized")
        return Kernel(self.values / s)

    def __repr__(self):
        return f"Kernel(shape={self.shape}, radii={self.radii})"


def as_kernel(h):
    """Return h as a Kernel, wrapping arrays and nested sequences"""
    if isinstance(h, Kernel):
        return h
    return Kernel(h)


def full_shape(x_shape, h):
    """Extents d_i + 2p_i of the full convolution of an x_shape input with h"""
    h = as_kernel(h)
    x_shape = check_shape(x_shape)
    if len(x_shape) != h.ndim:
        raise ShapeError(
            f"input has {len(x_shape)} dimensions but the kernel has {h.ndim}"
        )
    return tuple(d + 2 * p for d, p in zip(x_shape, h.radii))


def check_observation(y, x_shape, h):
    """Raise ShapeError unless y is a full-convolution output for x_shape and h"""
    expected = full_shape(x_shape, h)
    if tuple(np.shape(y)) != expected:
        raise ShapeError(
            f"observation shape {np.shape(y)} is not the full-convolution "
            f"shape {expected} for input {tuple(x_shape)} and kernel {as_kernel(h).shape}"
        )
    return


# =============================================================================
# Operators
# =============================================================================
def _accumulate(out, x, hv, lo, hi):
    """
    Add the contribution of every kernel tap to the output rows [lo, hi)
    """
    d0 = x.shape[0]
    rest = x.shape[1:]
    for tap in np.ndindex(*hv.shape):
        w = hv[tap]
        if w == 0.0:
            continue
        r0 = max(lo, tap[0])
        r1 = min(hi, tap[0] + d0)
        if r0 >= r1:
            continue
        out_index = (slice(r0, r1),) + tuple(
            slice(t, t + d) for t, d in zip(tap[1:], rest)
        )
        out[out_index] += w * x[r0 - tap[0] : r1 - tap[0]]
    return


def conv_full(x, h):
    """
    Full discrete convolution of x with the kernel h

    Parameters
    ----------
    x : np.ndarray
        Input tensor with extents d_i

    h : Kernel or array_like
        Kernel with extents 2p_i + 1 and the same number of dimensions as x

    Returns
    -------
    y : np.ndarray (read-only) [d_1 + 2p_1, ..., d_n + 2p_n]
    """
    h = as_kernel(h)
    x = np.asarray(x, dtype=np.float64)
    out_shape = full_shape(x.shape, h)
    out = np.zeros(out_shape)

    nrows = out_shape[0]
    nthreads = min(_num_threads, nrows // _MIN_ROWS_PER_THREAD)
    if nthreads <= 1:
        _accumulate(out, x, h.values, 0, nrows)
    else:
        bounds = np.linspace(0, nrows, nthreads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            futures = [
                pool.submit(_accumulate, out, x, h.values, lo, hi)
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for f in futures:
                f.result()

    return freeze(out)


def flip(h):
    """Return the flipped kernel, h~(s) = h(2p - s) in every dimension"""
    h = as_kernel(h)
    return Kernel(h.values[(slice(None, None, -1),) * h.ndim])


def crop_m(t, radii, target):
    """
    The crop operator M: keep indices 2p_i, ..., 2p_i + target_i - 1

    Parameters
    ----------
    t : np.ndarray
        Tensor with extents target_i + 4p_i

    radii : sequence of int
        Kernel radii p_i

    target : sequence of int
        Shape of the cropped tensor

    Returns
    -------
    c : np.ndarray (read-only) [target]
    """
    target = check_shape(target)
    radii = tuple(int(p) for p in radii)
    t = np.asarray(t, dtype=np.float64)
    if not (t.ndim == len(radii) == len(target)):
        raise ShapeError(
            f"crop of a {t.ndim}-d tensor with {len(radii)} radii "
            f"to a {len(target)}-d shape"
        )
    for e, p, m in zip(t.shape, radii, target):
        if e != m + 4 * p:
            raise ShapeError(
                f"crop needs extents target + 4p = "
                f"{tuple(m + 4 * p for m, p in zip(target, radii))}, got {t.shape}"
            )
    index = tuple(slice(2 * p, 2 * p + m) for p, m in zip(radii, target))
    return freeze(t[index])


def adjoint_apply(y, h, x_shape):
    """
    Apply the transpose of the convolution matrix of h to y

    Computed as M(y conv flip(h)), without forming the matrix.

    Parameters
    ----------
    y : np.ndarray
        Tensor with the full-convolution extents x_shape_i + 2p_i

    h : Kernel or array_like
        Convolution kernel

    x_shape : sequence of int
        Shape of the input space

    Returns
    -------
    z : np.ndarray (read-only) [x_shape]
    """
    h = as_kernel(h)
    x_shape = check_shape(x_shape)
    check_observation(y, x_shape, h)
    return crop_m(conv_full(y, flip(h)), h.radii, x_shape)


def normal_gradient(x, y, h):
    """
    Gradient of f(x) = 1/2 ||conv_full(x, h) - y||^2, evaluated as

        M(flip(h) conv (h conv x)) - M(flip(h) conv y)

    Parameters
    ----------
    x : np.ndarray
        Current estimate

    y : np.ndarray
        Observation with the full-convolution shape for x and h

    h : Kernel or array_like
        Convolution kernel

    Returns
    -------
    g : np.ndarray (read-only), same shape as x
    """
    h = as_kernel(h)
    x = np.asarray(x, dtype=np.float64)
    check_observation(y, x.shape, h)
    g = adjoint_apply(conv_full(x, h), h, x.shape) - adjoint_apply(y, h, x.shape)
    return freeze(g)
