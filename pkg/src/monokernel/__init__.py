"""Non-negative lattice transition kernels for correlated 2-D diffusions."""
__version__ = "0.1.0"

from .core import (  # noqa: E402
    DualCertificate,
    FeasibilityVerdict,
    LatticeConfig,
    ReducedModel,
    StencilSpec,
    TransitionKernel,
    canonicalize,
    ratio_set,
)
from .feasibility import (  # noqa: E402
    dual_certificate,
    dual_infimum,
    dual_window,
    envelope_max,
    is_feasible,
    min_stencil,
    necessary_min_s,
    rho_max,
)
from .lp import solve_kernel, verify_kernel  # noqa: E402
from .stencils import rational_stencil, seven_point, upwind_drift  # noqa: E402

__all__ = [
    "DualCertificate", "FeasibilityVerdict", "LatticeConfig", "ReducedModel", "StencilSpec",
    "TransitionKernel", "canonicalize", "ratio_set", "dual_certificate", "dual_infimum",
    "dual_window", "envelope_max", "is_feasible", "min_stencil", "necessary_min_s", "rho_max",
    "solve_kernel", "verify_kernel", "rational_stencil", "seven_point", "upwind_drift",
]
