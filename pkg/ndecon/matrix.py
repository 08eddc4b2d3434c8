"""
matrix - explicit block-Toeplitz realization of the convolution operator

The matrix A of a kernel h acting on inputs of shape (d_1, ..., d_n) is
built recursively along the first dimension. In one dimension it is the
banded Toeplitz matrix

    h(0)   0     ...  0
    h(1)   h(0)  ...  0
    ...
    h(2p)  ...        h(0)
    0      h(2p) ...
    ...
    0      0     ...  h(2p)

and in n dimensions it has the same banded pattern with scalar h(j) replaced
by the (n-1)-dimensional matrix of the kernel slice h[j, ...]. The dense
matrix is only ever used as a reference for the convolution operators, so
its size is capped.
"""

# =============================================================================
# Imports
# =============================================================================
import numpy as np

from ndecon.convolution import as_kernel, full_shape
from ndecon.errors import ShapeError
from ndecon.tensor import check_shape, freeze


def _build_recursive(hv, x_shape):
    """Dense matrix of the kernel values hv for inputs of shape x_shape"""
    d1 = x_shape[0]
    k1 = hv.shape[0]
    if len(x_shape) == 1:
        A = np.zeros((d1 + k1 - 1, d1))
        for c in range(d1):
            A[c : c + k1, c] = hv
        return A

    blocks = [_build_recursive(hv[j], x_shape[1:]) for j in range(k1)]
    br, bc = blocks[0].shape
    A = np.zeros(((d1 + k1 - 1) * br, d1 * bc))
    for c in range(d1):
        for j in range(k1):
            r = c + j
            A[r * br : (r + 1) * br, c * bc : (c + 1) * bc] = blocks[j]
    return A


class ExplicitConvMatrix:
    """
    Dense matrix A with vectorize(conv_full(x, h)) = A vectorize(x)
    """

    # Largest number of entries (rows * cols) that will be allocated
    MAX_ENTRIES = 10**7

    def __init__(self, entries, x_shape, y_shape):
        self.entries = freeze(entries)
        self.x_shape = tuple(x_shape)
        self.y_shape = tuple(y_shape)
        return

    @classmethod
    def _check_size(cls, h, x_shape):
        h = as_kernel(h)
        x_shape = check_shape(x_shape)
        y_shape = full_shape(x_shape, h)
        nentries = int(np.prod(y_shape)) * int(np.prod(x_shape))
        if nentries > cls.MAX_ENTRIES:
            raise ShapeError(
                f"explicit matrix would have {nentries} entries; "
                f"the limit is {cls.MAX_ENTRIES}"
            )
        return h, x_shape, y_shape

    @classmethod
    def build(cls, h, x_shape):
        """
        Build the matrix by the block recursion over the first dimension

        Parameters
        ----------
        h : Kernel or array_like
            Convolution kernel

        x_shape : sequence of int
            Shape of the input space

        Returns
        -------
        A : ExplicitConvMatrix
        """
        h, x_shape, y_shape = cls._check_size(h, x_shape)
        return cls(_build_recursive(h.values, x_shape), x_shape, y_shape)

    @classmethod
    def build_direct(cls, h, x_shape):
        """
        Build the same matrix from the index formula A[s + t, s] = h(t)
        """
        h, x_shape, y_shape = cls._check_size(h, x_shape)
        A = np.zeros((int(np.prod(y_shape)), int(np.prod(x_shape))))
        for col, s in enumerate(np.ndindex(*x_shape)):
            for t in np.ndindex(*h.shape):
                row = np.ravel_multi_index(
                    tuple(a + b for a, b in zip(s, t)), y_shape
                )
                A[row, col] = h.values[t]
        return cls(A, x_shape, y_shape)

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def cols(self):
        return self.entries.shape[1]

    def matvec(self, v):
        """Return A v for a vector of length cols"""
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.size != self.cols:
            raise ShapeError(f"vector length {v.size} != matrix columns {self.cols}")
        return freeze(self.entries @ v)

    def transpose_matvec(self, v):
        """Return A^T v for a vector of length rows"""
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.size != self.rows:
            raise ShapeError(f"vector length {v.size} != matrix rows {self.rows}")
        return freeze(self.entries.T @ v)

    def column_sums(self):
        return freeze(np.sum(self.entries, axis=0))

    def write_csv(self, filename):
        """
        Write the matrix as CSV, one row per line, full-precision scientific
        notation
        """
        np.savetxt(filename, self.entries, fmt="%.17e", delimiter=",")
        return

    def __repr__(self):
        return f"ExplicitConvMatrix({self.rows}x{self.cols}, x_shape={self.x_shape})"


def build_matrix(h, x_shape):
    return ExplicitConvMatrix.build(h, x_shape)


def matvec(A, v):
    return A.matvec(v)


def transpose_matvec(A, v):
    return A.transpose_matvec(v)
