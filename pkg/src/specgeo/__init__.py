"""Numerical laboratory for special complex, special symplectic and
special Kahler geometry built from holomorphic one-form or prepotential
data, together with the induced structures on the cotangent bundle."""

from .charts import (
    ChartCache,
    ChartPoint,
    ManifoldSpec,
    NewtonDiverged,
    NotRegular,
    ambient_space,
    chart_point,
    gamma_pullback,
    invert_special_coordinates,
    is_lagrangian,
    regularity_matrix,
)
from .cli import LoadedSpec, load_spec_file, main
from .cotangent import BundleEndomorphism, BundlePoint
from .expr import (
    EvaluationError,
    ExpressionAST,
    HoloJet,
    ParseError,
    UnknownVariable,
    eval_jet,
    parse_expression,
    to_source,
)
from .geometry import DegenerateForm, StepTooLarge, TensorSample
from .verify import (
    CheckResult,
    SpecInvalid,
    TOOL_VERSION,
    VerificationReport,
    registry,
    run_report,
)

__version__ = TOOL_VERSION

__all__ = [
    "__version__",
    "ManifoldSpec",
    "ChartPoint",
    "ChartCache",
    "BundlePoint",
    "BundleEndomorphism",
    "TensorSample",
    "ExpressionAST",
    "HoloJet",
    "CheckResult",
    "VerificationReport",
    "LoadedSpec",
    "NotRegular",
    "NewtonDiverged",
    "DegenerateForm",
    "StepTooLarge",
    "SpecInvalid",
    "ParseError",
    "UnknownVariable",
    "EvaluationError",
    "parse_expression",
    "to_source",
    "eval_jet",
    "chart_point",
    "invert_special_coordinates",
    "regularity_matrix",
    "is_lagrangian",
    "gamma_pullback",
    "ambient_space",
    "registry",
    "run_report",
    "load_spec_file",
    "main",
]
