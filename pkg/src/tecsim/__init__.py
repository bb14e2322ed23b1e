"""Finite-element solver and estimate auditor for coupled ion/heat/potential
transport in a heated electrochemical cell.

The package discretizes a system of I species balances, a temperature
equation with a nonlinear (Kirchhoff-transformed) heat capacity and
power-type radiative wall losses, and a potential equation, by implicit time
stepping with damped fixed-point iterations and P1 triangles in space.  Its
distinguishing feature is that the discrete energy inequality behind the
scheme's stability theory is *checked at runtime*, step by step and
cumulatively, with every constant explicit.
"""

import os as _os

# Cap BLAS/OpenMP pools before numpy/scipy spin them up; the sparse direct
# solves here are small enough that oversubscription only adds jitter.
_threads = _os.environ.get("TECSIM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
del _os

from .coefficients import (  # noqa: E402
    BoundsLedger,
    CoefficientSet,
    ConstantsReport,
    SmallnessReport,
    TECParams,
    check_smallness,
    compute_L_sharp,
    tec_to_abstract,
    validate_bounds,
)
from .config import Scenario, load_config, parse_config  # noqa: E402
from .errors import (  # noqa: E402
    BoundViolation,
    ConfigError,
    ExpressionParseError,
    LayoutMisaligned,
    MissingBound,
    NoExactSolution,
    NonFiniteValue,
    PicardDiverged,
    SchemaError,
    SingularSystem,
    SmallnessViolated,
    StepCountTooSmall,
    StepTooLarge,
    TecsimError,
)
from .estimates import (  # noqa: E402
    AprioriBound,
    CotaulVerdict,
    EnergyAuditor,
    EstimateSummary,
    StepAudit,
    audit_trajectory,
    compute_R,
    translate_estimate,
    verify_cotaul,
)
from .fem_core import (  # noqa: E402
    Field,
    estimate_K2,
    estimate_P2,
    field_from_function,
    norm_h1_semi,
    norm_l2,
)
from .mesh import DomainSpec, Mesh, build_rect_mesh, refine_uniform  # noqa: E402
from .scalar_tools import (  # noqa: E402
    KirchhoffEvaluator,
    check_bb,
    check_bpsi,
    discrete_gronwall,
    discrete_gronwall_tight,
)
from .stepper import (  # noqa: E402
    PicardConfig,
    RotheConfig,
    StepState,
    Trajectory,
    rothe_step,
    run,
    step_residual,
)

__version__ = "0.1.0"

__all__ = [
    "AprioriBound",
    "BoundViolation",
    "BoundsLedger",
    "CoefficientSet",
    "ConfigError",
    "ConstantsReport",
    "CotaulVerdict",
    "DomainSpec",
    "EnergyAuditor",
    "EstimateSummary",
    "ExpressionParseError",
    "Field",
    "KirchhoffEvaluator",
    "LayoutMisaligned",
    "Mesh",
    "MissingBound",
    "NoExactSolution",
    "NonFiniteValue",
    "PicardConfig",
    "PicardDiverged",
    "RotheConfig",
    "Scenario",
    "SchemaError",
    "SingularSystem",
    "SmallnessReport",
    "SmallnessViolated",
    "StepAudit",
    "StepCountTooSmall",
    "StepTooLarge",
    "StepState",
    "TECParams",
    "TecsimError",
    "Trajectory",
    "audit_trajectory",
    "build_rect_mesh",
    "check_bb",
    "check_bpsi",
    "check_smallness",
    "compute_L_sharp",
    "compute_R",
    "discrete_gronwall",
    "discrete_gronwall_tight",
    "estimate_K2",
    "estimate_P2",
    "field_from_function",
    "load_config",
    "norm_h1_semi",
    "norm_l2",
    "parse_config",
    "refine_uniform",
    "rothe_step",
    "run",
    "step_residual",
    "tec_to_abstract",
    "translate_estimate",
    "validate_bounds",
    "verify_cotaul",
]
