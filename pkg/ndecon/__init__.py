"""
ndecon is an n-dimensional convolution and nonnegative deconvolution package
"""

__version__ = "0.1.0"

from ndecon.errors import (
    BoundsError,
    ConfigError,
    DegenerateOperatorError,
    FormatError,
    LengthMismatchError,
    NdeconError,
    ShapeError,
    TruncatedDataError,
    UndefinedMetricError,
)
from ndecon.convolution import (
    Kernel,
    adjoint_apply,
    conv_full,
    crop_m,
    flip,
    full_shape,
    normal_gradient,
    set_num_threads,
)
from ndecon.matrix import ExplicitConvMatrix, build_matrix
from ndecon.solvers import (
    DeconvConfig,
    DeconvReport,
    RlConfig,
    StopReason,
    deconv_pg,
    deconv_rl,
    kkt_residual,
    objective,
)
from ndecon.simulation import (
    NoiseSpec,
    PsfSpec,
    add_gaussian_noise,
    forward_model,
    gaussian_psf,
    phantom_lines,
    phantom_texture,
    snr_db,
)
