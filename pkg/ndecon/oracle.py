"""
oracle - randomized checks of the convolution operators against the
explicit matrix

For random inputs, kernels and observations the suite checks that

- the full convolution equals the explicit matrix-vector product,
- the flip/convolve/crop adjoint equals the transposed product,
- <A x, y> = <x, A^T y>,
- one projected-gradient step computed with convolutions equals the same
  step computed with the explicit matrix.
"""

# =============================================================================
# Imports
# =============================================================================
import logging
from dataclasses import dataclass, field

import numpy as np

from ndecon.convolution import Kernel, adjoint_apply, conv_full, full_shape, normal_gradient
from ndecon.matrix import ExplicitConvMatrix
from ndecon.solvers import projected_gradient_step
from ndecon.tensor import devectorize, inner, vectorize

logger = logging.getLogger(__name__)

PROPERTIES = ("conv-matrix", "adjoint-transpose", "adjoint-identity", "pg-step")


@dataclass
class PropertyResult:
    name: str
    cases: int = 0
    failures: int = 0
    max_error: float = 0.0

    @property
    def passed(self):
        return self.failures == 0

    def record(self, error, tol):
        self.cases += 1
        self.max_error = max(self.max_error, error)
        if not error <= tol:
            self.failures += 1
        return


@dataclass
class SuiteResult:
    results: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.results.values())


def random_instance(rng, ndim, max_extent, max_radius):
    """
    Draw a random input, kernel and observation

    The dimension count is uniform in 1..ndim, extents in 1..max_extent and
    radii in 0..max_radius; values are standard normal.
    """
    nd = int(rng.integers(1, ndim + 1))
    x_shape = tuple(int(d) for d in rng.integers(1, max_extent + 1, size=nd))
    radii = tuple(int(p) for p in rng.integers(0, max_radius + 1, size=nd))
    h = Kernel(rng.standard_normal(tuple(2 * p + 1 for p in radii)))
    x = rng.standard_normal(x_shape)
    y = rng.standard_normal(full_shape(x_shape, h))
    return x, h, y


def pg_step_convolution(x, y, h, step):
    """One projected-gradient step with the gradient evaluated by convolutions"""

    def objective_fn(c):
        r = conv_full(c, h) - y
        return 0.5 * float(np.dot(r.ravel(), r.ravel()))

    g = normal_gradient(x, y, h)
    return projected_gradient_step(x, g, objective_fn, objective_fn(x), step)


def pg_step_explicit(A, x, y, step):
    """The same step with A^T A x - A^T y formed from the explicit matrix"""
    yv = vectorize(y)

    def objective_fn(c):
        r = A.matvec(vectorize(c)) - yv
        return 0.5 * float(np.dot(r, r))

    g = A.transpose_matvec(A.matvec(vectorize(x))) - A.transpose_matvec(yv)
    g = devectorize(g, x.shape)
    return projected_gradient_step(x, g, objective_fn, objective_fn(x), step)


def run_suite(
    ndim=3,
    max_extent=5,
    max_radius=2,
    cases=200,
    seed=0,
    atol=1e-12,
    rtol_identity=1e-10,
    step_tol=1e-10,
):
    """
    Run the randomized checks

    Parameters
    ----------
    ndim : int
        Largest number of dimensions drawn

    max_extent : int
        Largest input extent drawn

    max_radius : int
        Largest kernel radius drawn

    cases : int
        Number of random instances

    seed : int
        Seed of the instance generator

    atol : float
        Absolute tolerance of the matrix comparisons

    rtol_identity : float
        Tolerance of the inner-product identity relative to ||A x|| ||y||

    step_tol : float
        Absolute tolerance of the projected-gradient step comparison

    Returns
    -------
    result : SuiteResult
    """
    rng = np.random.default_rng(seed)
    suite = SuiteResult({name: PropertyResult(name) for name in PROPERTIES})
    for case in range(cases):
        x, h, y = random_instance(rng, ndim, max_extent, max_radius)
        A = ExplicitConvMatrix.build(h, x.shape)

        ax = conv_full(x, h)
        err = np.max(np.abs(vectorize(ax) - A.matvec(vectorize(x))))
        suite.results["conv-matrix"].record(err, atol)

        aty = adjoint_apply(y, h, x.shape)
        err = np.max(np.abs(vectorize(aty) - A.transpose_matvec(vectorize(y))))
        suite.results["adjoint-transpose"].record(err, atol)

        scale = np.linalg.norm(ax) * np.linalg.norm(y)
        err = abs(inner(ax, y) - inner(x, aty)) / scale if scale > 0.0 else 0.0
        suite.results["adjoint-identity"].record(err, rtol_identity)

        # Step 1/||A||^2 from the matrix, shared by both computations
        sigma = np.linalg.norm(A.entries, 2)
        if sigma > 0.0:
            xp = np.abs(x)
            step = 1.0 / sigma**2
            s1 = pg_step_convolution(xp, y, h, step)
            s2 = pg_step_explicit(A, xp, y, step)
            err = np.max(np.abs(s1.x - s2.x))
            if s1.status != s2.status:
                err = np.inf
            suite.results["pg-step"].record(err, step_tol)

        logger.debug(f"oracle case {case}: x {x.shape}, kernel {h.shape}")

    return suite
