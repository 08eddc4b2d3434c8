"""
simulation - phantoms, point spread functions, noise and image metrics

The observation model is Y = X conv H + N: the truth is blurred with the
PSF by full convolution and i.i.d. Gaussian noise is added afterwards.
"""

# =============================================================================
# Imports
# =============================================================================
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ndecon.convolution import Kernel, check_observation, conv_full, as_kernel
from ndecon.errors import ConfigError, ShapeError, UndefinedMetricError
from ndecon.tensor import check_shape, freeze


# =============================================================================
# Specifications
# =============================================================================
@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise N(mean, std_dev^2) drawn from a seeded stream"""

    mean: float = 0.0
    std_dev: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.std_dev >= 0.0:
            raise ConfigError("the noise standard deviation must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("the noise seed must be a 64-bit unsigned integer")
        return


@dataclass(frozen=True)
class PsfSpec:
    """
    Point spread function description

    kind is one of 'gaussian' (size and sigma), 'delta' (size) or 'custom'
    (values)
    """

    kind: str = "gaussian"
    size: tuple = (5, 5)
    sigma: float = 1.0
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        valid_kinds = ("gaussian", "delta", "custom")
        if self.kind not in valid_kinds:
            raise ConfigError(f"PSF kind must be one of {valid_kinds}")
        if self.kind == "gaussian" and not self.sigma > 0.0:
            raise ConfigError("the Gaussian PSF needs sigma > 0")
        if self.kind == "custom" and self.values is None:
            raise ConfigError("a custom PSF needs values")
        return


# =============================================================================
# Phantoms
# =============================================================================
def phantom_lines(size=(512, 512), n_lines=9, intensity=255.0):
    """
    Black image crossed by straight one-pixel lines through its center

    Line i runs at the angle i * pi / n_lines. Lines closer to horizontal
    are rasterized one pixel per column, the others one pixel per row.

    Parameters
    ----------
    size : (int, int)
        Number of rows and columns, each >= 3

    n_lines : int
        Number of lines

    intensity : float
        Value of the line pixels

    Returns
    -------
    image : np.ndarray (read-only) [rows, cols]
    """
    rows, cols = check_shape(size)
    if rows < 3 or cols < 3:
        raise ShapeError(f"a line phantom needs at least 3x3 pixels, got {size}")
    if int(n_lines) < 1:
        raise ConfigError("n_lines must be >= 1")

    image = np.zeros((rows, cols))
    rc, cc = rows // 2, cols // 2
    for i in range(int(n_lines)):
        theta = i * np.pi / n_lines
        c, s = np.cos(theta), np.sin(theta)
        if abs(c) >= abs(s):
            col = np.arange(cols)
            row = np.rint(rc - (col - cc) * (s / c)).astype(int)
        else:
            row = np.arange(rows)
            col = np.rint(cc + (rc - row) * (c / s)).astype(int)
        inside = (row >= 0) & (row < rows) & (col >= 0) & (col < cols)
        image[row[inside], col[inside]] = intensity

    return freeze(image)


def phantom_texture(size=(225, 225), seed=0):
    """
    Deterministic 8-bit test image with smooth shading, a grating, blocks and
    disks of assorted intensities

    Parameters
    ----------
    size : (int, int)
        Number of rows and columns

    seed : int
        Seed of the generator that places the disks

    Returns
    -------
    image : np.ndarray (read-only), integer values in [0, 255]
    """
    rows, cols = check_shape(size)
    if rows < 3 or cols < 3:
        raise ShapeError(f"a texture phantom needs at least 3x3 pixels, got {size}")
    rng = np.random.Generator(np.random.PCG64(seed))
    r, c = np.meshgrid(
        np.linspace(0.0, 1.0, rows), np.linspace(0.0, 1.0, cols), indexing="ij"
    )

    # Smooth background shading
    image = 40.0 + 60.0 * r + 20.0 * c

    # Sinusoidal grating in the upper-left quadrant
    grating = (r < 0.45) & (c < 0.45)
    image[grating] += 60.0 * (0.5 + 0.5 * np.sin(2.0 * np.pi * 12.0 * (r + c)))[grating]

    # Checkerboard block in the lower-right quadrant
    block = (r > 0.6) & (c > 0.6)
    checker = (np.floor(r * 20.0) + np.floor(c * 20.0)) % 2
    image[block] = 30.0 + 180.0 * checker[block]

    # Disks of random radius and intensity
    for i in range(8):
        r0, c0 = rng.random(2)
        radius = 0.04 + 0.08 * rng.random()
        value = 255.0 * rng.random()
        image[(r - r0) ** 2 + (c - c0) ** 2 < radius**2] = value

    return freeze(np.rint(np.clip(image, 0.0, 255.0)))


# =============================================================================
# Point spread functions
# =============================================================================
def gaussian_psf(size=(5, 5), sigma=1.0):
    """
    Sampled Gaussian exp(-sum_i (s_i - p_i)^2 / (2 sigma^2)) normalized to
    unit sum

    Parameters
    ----------
    size : sequence of odd int
        Kernel extents 2p_i + 1

    sigma : float
        Standard deviation in pixels

    Returns
    -------
    h : Kernel
    """
    shape = check_shape(size)
    for k in shape:
        if k % 2 != 1:
            raise ShapeError(f"PSF extents must be odd, got {shape}")
    if not sigma > 0.0:
        raise ConfigError("sigma must be > 0")
    grid = np.indices(shape, dtype=np.float64)
    r2 = np.zeros(shape)
    for axis, k in enumerate(shape):
        r2 += (grid[axis] - (k - 1) // 2) ** 2
    values = np.exp(-r2 / (2.0 * sigma**2))
    return Kernel(values / np.sum(values))


def make_psf(spec):
    """Create the kernel described by a PsfSpec"""
    if spec.kind == "gaussian":
        h = gaussian_psf(spec.size, spec.sigma)
    elif spec.kind == "delta":
        h = Kernel.delta(tuple((k - 1) // 2 for k in check_shape(spec.size)))
    else:
        h = as_kernel(spec.values)
    if not h.is_nonnegative():
        raise ConfigError("PSF values must be nonnegative")
    return h


# =============================================================================
# Noise and forward model
# =============================================================================
def standard_normal(n, seed):
    """
    n standard normal samples from the PCG64 stream of the seed

    Uniforms u1, u2 in [0, 1) come in pairs from Generator.random() and are
    mapped by Box-Muller, r = sqrt(-2 ln(1 - u1)), to (r cos 2 pi u2,
    r sin 2 pi u2), in that order.
    """
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    m = (n + 1) // 2
    u = rng.random(2 * m)
    radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * m)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n]


def add_gaussian_noise(t, spec):
    """
    Add i.i.d. Gaussian noise to a tensor. The samples depend only on the
    shape of t and spec.seed; the result is not clamped.
    """
    t = np.asarray(t, dtype=np.float64)
    z = standard_normal(t.size, spec.seed).reshape(t.shape)
    return freeze(t + (spec.mean + spec.std_dev * z))


def forward_model(x, h, noise=None):
    """Blur x with h by full convolution, then add noise if given"""
    y = conv_full(x, h)
    if noise is not None:
        y = add_gaussian_noise(y, noise)
    return y


# =============================================================================
# Metrics
# =============================================================================
def snr_db(reference, estimate):
    """
    Signal-to-noise ratio 10 log10(sum ref^2 / sum (est - ref)^2) in dB

    Returns +inf when the estimate equals the reference.
    """
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ShapeError(f"shape mismatch: {reference.shape} vs {estimate.shape}")
    signal = float(np.sum(reference**2))
    if signal == 0.0:
        raise UndefinedMetricError("the SNR of an all-zero reference is undefined")
    error = float(np.sum((estimate - reference) ** 2))
    if error == 0.0:
        return float("inf")
    return 10.0 * np.log10(signal / error)


def aligned_crop(y, h, x_shape):
    """
    Crop an observation to the pixels aligned with the truth: the kernel is
    centered, so truth pixel s sits at observed pixel s + p
    """
    h = as_kernel(h)
    x_shape = check_shape(x_shape)
    check_observation(y, x_shape, h)
    index = tuple(slice(p, p + d) for p, d in zip(h.radii, x_shape))
    return freeze(np.asarray(y)[index])


def relative_residual(x, y, h):
    """||conv_full(x, h) - y|| / ||y||"""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    check_observation(y, x.shape, h)
    ynorm = np.linalg.norm(y)
    if ynorm == 0.0:
        raise UndefinedMetricError("relative residual of an all-zero observation")
    return float(np.linalg.norm(conv_full(x, h) - y) / ynorm)
