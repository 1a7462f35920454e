"""Numerical tools for step-two Carnot groups: H-type deviation, horizontal
calculus of Kaplan's quasinorm, and the anisotropic Heisenberg group
H^n(1/2, 1, ..., 1)."""

__version__ = "0.1.0"

from .algebra import (  # noqa: E402
    GroupPoint,
    StepTwoAlgebra,
    from_name,
    load_group,
    make_free_step_two,
    make_g_bar_eps,
    make_g_eps,
    make_h_half,
    make_heisenberg_aniso,
    validate,
)
from .deviation import SolverConfig, deviation, deviation_at_metric  # noqa: E402
from .metric import VerticalMetric, h_type_defect, j_matrix  # noqa: E402

__all__ = [
    "__version__",
    "GroupPoint",
    "StepTwoAlgebra",
    "from_name",
    "load_group",
    "make_free_step_two",
    "make_g_bar_eps",
    "make_g_eps",
    "make_h_half",
    "make_heisenberg_aniso",
    "validate",
    "SolverConfig",
    "deviation",
    "deviation_at_metric",
    "VerticalMetric",
    "h_type_defect",
    "j_matrix",
]
