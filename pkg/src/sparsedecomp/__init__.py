"""Sparse-layer image decomposition toolkit.

Splits an image into a structured layer and a sparse layer by convex
optimization (a scaled ADMM solver with FFT-diagonalized inner solves),
and runs the same computation as an unrolled forward network whose
per-layer kernels and thresholds come from a parameter bundle. Includes a
deterministic synthetic-scene generator, a log-domain multichannel
pipeline for multiplicative imagery, pixelwise segmentation metrics, and
float image I/O.
"""

from .admm import (
    DecompositionResult,
    KktReport,
    ModelParams,
    SolverState,
    StoppingRule,
    admm_solve,
    augmented_lagrangian,
    avmu_u,
    avmu_v,
    kkt_check,
    lss_solve,
    objective,
    residuals,
    scaled_lagrangian_grad,
)
from .errors import DivergenceError, NumericalError, ParseError, ShapeError
from .grid import as_grid, as_stack, axpy, inner, norm1, norm2, norm_inf
from .metrics import (
    ConfusionCounts,
    acc,
    auc,
    confusion,
    cross_entropy,
    mcc,
    roc_points,
    sparsity_fraction,
)
from .ops import (
    Kernel,
    KernelBank,
    adjoint_conv,
    apply_otf,
    conv_periodic,
    kernel_otf,
    make_diff_bank,
    soft_threshold,
)
from .pipeline import (
    ChannelPlan,
    RunConfig,
    decompose_multichannel,
    exp_transform,
    log_transform,
)
from .synth import Scene, SplitMix64, make_squares_scene
from .unroll import (
    LayerTrace,
    ParameterBundle,
    bundle_sensitivity,
    idnet_forward,
    init_default,
    load_bundle,
    save_bundle,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
