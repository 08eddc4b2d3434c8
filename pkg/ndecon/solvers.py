"""
solvers - nonnegative deconvolution built only on convolution operators

Two solvers share the DeconvReport result type:

- deconv_pg: projected gradient descent on f(x) = 1/2 ||conv_full(x, h) - y||^2
  subject to x >= 0. The gradient is evaluated with convolutions only,

      grad f(x) = M(flip(h) conv (h conv x)) - M(flip(h) conv y),

  and every step is accepted only if it strictly decreases f.

- deconv_rl: the Richardson-Lucy multiplicative iteration
  x <- x * adjoint(y / conv_full(x, h)), used as the reference method.
"""

# =============================================================================
# Imports
# =============================================================================
import enum
import logging
import time
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import h5py
import numpy as np

from ndecon.convolution import (
    adjoint_apply,
    as_kernel,
    check_observation,
    conv_full,
    normal_gradient,
)
from ndecon.errors import ConfigError, DegenerateOperatorError, ShapeError
from ndecon.tensor import check_shape, freeze, guarded_div

logger = logging.getLogger(__name__)


# =============================================================================
# Configuration and results
# =============================================================================
class StopReason(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    STALLED = "stalled"


class _Options:
    """Option-dictionary constructor shared by the solver configurations"""

    @classmethod
    def from_options(cls, **kwargs):
        """
        Create the configuration from keyword options. Options that are not
        given keep their default value; unknown options are an error.
        """
        names = {f.name for f in fields(cls)}
        for key in kwargs:
            if key not in names:
                raise ConfigError("%s is not a valid option" % (key))
        return cls(**kwargs)


@dataclass(frozen=True)
class DeconvConfig(_Options):
    """
    Options for the projected-gradient solver

    Parameters
    ----------
    max_iters : int
        Maximum number of accepted iterations

    tol_rel_objective : float
        Stop once one iteration decreases the objective by less than this
        fraction of its current value

    initial_step : float or 'auto'
        Step size tried first at every iteration. 'auto' uses the inverse of a
        power-iteration estimate of the largest eigenvalue of A^T A

    backtrack_factor : float in (0, 1)
        Factor applied to the step until the objective decreases

    max_backtracks : int
        Number of step reductions tried before the line search gives up

    power_iters : int
        Power iterations used by the 'auto' step

    tol_kkt : float
        When the line search gives up, the run counts as converged if the KKT
        residual is below tol_kkt * max(1, max|A^T y|), and as stalled otherwise
    """

    max_iters: int = 500
    tol_rel_objective: float = 1e-6
    initial_step: object = "auto"
    backtrack_factor: float = 0.5
    max_backtracks: int = 50
    power_iters: int = 30
    tol_kkt: float = 1e-9

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ConfigError("max_iters must be a positive integer")
        if self.tol_rel_objective < 0.0:
            raise ConfigError("tol_rel_objective must be >= 0")
        if isinstance(self.initial_step, str):
            if self.initial_step != "auto":
                raise ConfigError("initial_step must be a positive float or 'auto'")
        elif not float(self.initial_step) > 0.0:
            raise ConfigError("initial_step must be a positive float or 'auto'")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ConfigError("backtrack_factor must lie in (0, 1)")
        if int(self.max_backtracks) < 1:
            raise ConfigError("max_backtracks must be a positive integer")
        if int(self.power_iters) < 1:
            raise ConfigError("power_iters must be a positive integer")
        if self.tol_kkt < 0.0:
            raise ConfigError("tol_kkt must be >= 0")
        return


@dataclass(frozen=True)
class RlConfig(_Options):
    """
    Options for the Richardson-Lucy solver

    Parameters
    ----------
    max_iters : int
        Number of multiplicative updates

    tol_rel_change : float
        Stop once ||x_new - x|| <= tol_rel_change * ||x||
    """

    max_iters: int = 500
    tol_rel_change: float = 0.0

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ConfigError("max_iters must be a positive integer")
        if self.tol_rel_change < 0.0:
            raise ConfigError("tol_rel_change must be >= 0")
        return


@dataclass
class DeconvReport:
    """
    Outcome of a deconvolution run

    The traces hold one entry per iteration run: the objective
    1/2 ||A x - y||^2 and the KKT residual of the iterate after that
    iteration, and for the projected-gradient solver the accepted step size.
    For Richardson-Lucy the objective uses the clamped observation and the
    normalized kernel.
    """

    estimate: np.ndarray
    objective_trace: list
    iterations_run: int
    stop_reason: StopReason
    wall_time: float
    method: str = "pg"
    kkt_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    initial_objective: float = 0.0
    clamped_pixels: int = 0
    kernel_scale: float = 1.0

    def write_trace_csv(self, filename):
        """Write the traces as 'iter,objective,kkt' rows"""
        rows = np.zeros((self.iterations_run, 3))
        rows[:, 0] = np.arange(1, self.iterations_run + 1)
        rows[:, 1] = self.objective_trace
        rows[:, 2] = self.kkt_trace
        np.savetxt(
            filename,
            rows,
            fmt=["%d", "%.17e", "%.17e"],
            delimiter=",",
            header="iter,objective,kkt",
            comments="",
        )
        return

    def write_history(self, filename):
        """
        Write the run history and the estimate to an .hdf5 file

        Parameters
        ----------
        filename : str
            Name of the output file, including the .hdf5 extension
        """
        with h5py.File(filename, "w") as h5:
            h5["estimate"] = np.asarray(self.estimate)
            h5["history/objective"] = np.asarray(self.objective_trace, dtype=float)
            h5["history/kkt"] = np.asarray(self.kkt_trace, dtype=float)
            h5["history/step"] = np.asarray(self.step_trace, dtype=float)
            h5["history"].attrs["method"] = self.method
            h5["history"].attrs["stop_reason"] = self.stop_reason.value
            h5["history"].attrs["iterations_run"] = self.iterations_run
            h5["history"].attrs["wall_time"] = self.wall_time
            h5["history"].attrs["initial_objective"] = self.initial_objective
            if self.method == "rl":
                h5["history"].attrs["clamped_pixels"] = self.clamped_pixels
                h5["history"].attrs["kernel_scale"] = self.kernel_scale
        return


# =============================================================================
# Objective and diagnostics
# =============================================================================
def _check_kernel(h):
    h = as_kernel(h)
    if h.is_zero():
        raise DegenerateOperatorError("the kernel is identically zero")
    return h


def objective(x, y, h):
    """Return f(x) = 1/2 sum (conv_full(x, h) - y)^2"""
    h = as_kernel(h)
    x = np.asarray(x, dtype=np.float64)
    check_observation(y, x.shape, h)
    r = conv_full(x, h) - y
    return 0.5 * float(np.dot(r.ravel(), r.ravel()))


def _kkt(x, g):
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(np.minimum(x, g))))


def kkt_residual(x, y, h):
    """
    First-order optimality measure max |min(x_i, g_i)| of the nonnegative
    least-squares problem, with g the gradient at x. Zero exactly at its
    KKT points.
    """
    x = np.asarray(x, dtype=np.float64)
    return _kkt(x, normal_gradient(x, y, h))


def estimate_step(h, x_shape, power_iters=30):
    """
    Return 1/lambda, lambda being a power-iteration estimate of the largest
    eigenvalue of A^T A started from the all-ones vector

    Parameters
    ----------
    h : Kernel or array_like
        Convolution kernel

    x_shape : sequence of int
        Shape of the input space

    power_iters : int
        Number of power iterations

    Returns
    -------
    step : float
    """
    h = _check_kernel(h)
    x_shape = check_shape(x_shape)
    if int(power_iters) < 1:
        raise ConfigError("power_iters must be >= 1")
    v = np.ones(x_shape) / np.sqrt(np.prod(x_shape))
    lam = 0.0
    for i in range(int(power_iters)):
        w = adjoint_apply(conv_full(v, h), h, x_shape)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            raise DegenerateOperatorError("A^T A annihilated the power iterate")
        v = w / lam
    return 1.0 / lam


# =============================================================================
# Projected gradient
# =============================================================================
class StepResult(NamedTuple):
    x: np.ndarray
    objective: float
    step: float
    backtracks: int
    status: str  # 'accepted', 'stationary' or 'failed'


def projected_gradient_step(
    x, gradient, objective_fn, fx, step, backtrack_factor=0.5, max_backtracks=50
):
    """
    Take one step x+ = max{x - delta * gradient, 0}, shrinking delta until
    objective_fn(x+) < fx

    Parameters
    ----------
    x : np.ndarray
        Current (nonnegative) iterate

    gradient : np.ndarray
        Gradient of the objective at x

    objective_fn : callable
        Objective evaluated at a candidate

    fx : float
        Objective at x

    step : float
        First step size tried

    backtrack_factor : float
        Step reduction factor

    max_backtracks : int
        Number of reductions tried before giving up

    Returns
    -------
    result : StepResult
        The candidate is returned unchanged (x) when the projected step does
        not move ('stationary') or no step decreased the objective ('failed')
    """
    for i in range(max_backtracks + 1):
        candidate = np.maximum(x - step * gradient, 0.0)
        if i == 0 and np.array_equal(candidate, x):
            return StepResult(x, fx, step, 0, "stationary")
        fc = objective_fn(candidate)
        if fc < fx:
            return StepResult(freeze(candidate), fc, step, i, "accepted")
        step *= backtrack_factor
    return StepResult(x, fx, step, max_backtracks, "failed")


def deconv_pg(y, h, x_shape, cfg=None):
    """
    Nonnegative least-squares deconvolution by projected gradient descent

    Parameters
    ----------
    y : np.ndarray
        Observation with the full-convolution shape for x_shape and h

    h : Kernel or array_like
        Point spread function; it is not normalized

    x_shape : sequence of int
        Shape of the estimate

    cfg : DeconvConfig or None
        Solver options; defaults are used when None

    Returns
    -------
    report : DeconvReport

    Notes
    -----
    The iteration starts from max(A^T y, 0). When that start is already
    stationary, as for the delta kernel h = [1], the run stops as converged
    with iterations_run == 0 and the estimate max(y, 0).
    """
    cfg = DeconvConfig() if cfg is None else cfg
    t0 = time.perf_counter()
    h = _check_kernel(h)
    x_shape = check_shape(x_shape)
    check_observation(y, x_shape, h)
    y = np.asarray(y, dtype=np.float64)

    # The constant part of the gradient, M(flip(h) conv y)
    aty = adjoint_apply(y, h, x_shape)
    kkt_scale = max(1.0, float(np.max(np.abs(aty))))

    if cfg.initial_step == "auto":
        step0 = estimate_step(h, x_shape, cfg.power_iters)
    else:
        step0 = float(cfg.initial_step)

    # The objective keeps the convolution of the last candidate it evaluated
    cache = {}

    def objective_fn(c):
        ac = conv_full(c, h)
        cache["Ax"] = ac
        r = ac - y
        return 0.5 * float(np.dot(r.ravel(), r.ravel()))

    x = freeze(np.maximum(aty, 0.0))
    fx = objective_fn(x)
    g = adjoint_apply(cache["Ax"], h, x_shape) - aty
    initial_objective = fx
    logger.debug(f"pg: step0 = {step0:.6e}, f(x0) = {fx:.6e}")

    objective_trace = []
    kkt_trace = []
    step_trace = []
    stop_reason = StopReason.MAX_ITERS
    for k in range(cfg.max_iters):
        result = projected_gradient_step(
            x, g, objective_fn, fx, step0, cfg.backtrack_factor, cfg.max_backtracks
        )
        if result.status == "stationary":
            stop_reason = StopReason.CONVERGED
            break
        elif result.status == "failed":
            if _kkt(x, g) <= cfg.tol_kkt * kkt_scale:
                stop_reason = StopReason.CONVERGED
            else:
                stop_reason = StopReason.STALLED
            break

        # The accepted candidate was the last one evaluated
        fprev = fx
        x, fx = result.x, result.objective
        g = adjoint_apply(cache["Ax"], h, x_shape) - aty

        objective_trace.append(fx)
        kkt_trace.append(_kkt(x, g))
        step_trace.append(result.step)
        logger.debug(
            f"pg: iter {k + 1:5d} f = {fx:.10e} step = {result.step:.3e} "
            f"backtracks = {result.backtracks}"
        )

        if fx == 0.0 or fprev - fx < cfg.tol_rel_objective * fprev:
            stop_reason = StopReason.CONVERGED
            break

    wall_time = time.perf_counter() - t0
    logger.info(
        f"pg: {stop_reason.value} after {len(objective_trace)} iterations "
        f"in {wall_time:.3f} s"
    )
    return DeconvReport(
        estimate=x,
        objective_trace=objective_trace,
        iterations_run=len(objective_trace),
        stop_reason=stop_reason,
        wall_time=wall_time,
        method="pg",
        kkt_trace=kkt_trace,
        step_trace=step_trace,
        initial_objective=initial_objective,
    )


# =============================================================================
# Richardson-Lucy
# =============================================================================
def deconv_rl(y, h, x_shape, cfg=None, x0=None):
    """
    Richardson-Lucy deconvolution under the full-convolution model

    Negative observed pixels are clamped to zero (the count is reported) and
    the kernel is normalized to unit sum. The estimate corresponds to the
    normalized kernel; it is not rescaled by the original kernel sum.

    Parameters
    ----------
    y : np.ndarray
        Observation with the full-convolution shape for x_shape and h

    h : Kernel or array_like
        Nonnegative point spread function with a positive sum

    x_shape : sequence of int
        Shape of the estimate

    cfg : RlConfig or None
        Solver options; defaults are used when None

    x0 : np.ndarray or None
        Nonnegative starting estimate. Defaults to the flat image with the
        mean intensity sum(y) / prod(x_shape)

    Returns
    -------
    report : DeconvReport
    """
    cfg = RlConfig() if cfg is None else cfg
    t0 = time.perf_counter()
    h = _check_kernel(h)
    if not h.is_nonnegative():
        raise DegenerateOperatorError("Richardson-Lucy needs a nonnegative kernel")
    kernel_scale = h.total()
    h = h.normalized()
    x_shape = check_shape(x_shape)
    check_observation(y, x_shape, h)

    y = np.asarray(y, dtype=np.float64)
    clamped_pixels = int(np.count_nonzero(y < 0.0))
    if clamped_pixels > 0:
        logger.info(f"rl: clamped {clamped_pixels} negative observed pixels to 0")
    y = np.maximum(y, 0.0)

    if x0 is None:
        x = np.full(x_shape, float(np.sum(y)) / np.prod(x_shape))
    else:
        x = np.array(x0, dtype=np.float64)
        if x.shape != x_shape:
            raise ShapeError(f"x0 shape {x.shape} does not match {x_shape}")
        if not np.all(np.isfinite(x)) or np.any(x < 0.0):
            raise ConfigError("x0 must be finite and nonnegative")
    x = freeze(x)

    ax = conv_full(x, h)
    r = ax - y
    initial_objective = 0.5 * float(np.dot(r.ravel(), r.ravel()))

    objective_trace = []
    kkt_trace = []
    stop_reason = StopReason.MAX_ITERS
    for k in range(cfg.max_iters):
        ratio = guarded_div(y, ax)
        x_new = freeze(x * adjoint_apply(ratio, h, x_shape))
        ax = conv_full(x_new, h)

        r = ax - y
        objective_trace.append(0.5 * float(np.dot(r.ravel(), r.ravel())))
        kkt_trace.append(_kkt(x_new, adjoint_apply(r, h, x_shape)))

        xnorm = np.linalg.norm(x)
        change = np.linalg.norm(x_new - x)
        x = x_new
        logger.debug(f"rl: iter {k + 1:5d} f = {objective_trace[-1]:.10e}")
        if change <= cfg.tol_rel_change * xnorm:
            stop_reason = StopReason.CONVERGED
            break

    wall_time = time.perf_counter() - t0
    logger.info(
        f"rl: {stop_reason.value} after {len(objective_trace)} iterations "
        f"in {wall_time:.3f} s"
    )
    return DeconvReport(
        estimate=x,
        objective_trace=objective_trace,
        iterations_run=len(objective_trace),
        stop_reason=stop_reason,
        wall_time=wall_time,
        method="rl",
        kkt_trace=kkt_trace,
        initial_objective=initial_objective,
        clamped_pixels=clamped_pixels,
        kernel_scale=kernel_scale,
    )
