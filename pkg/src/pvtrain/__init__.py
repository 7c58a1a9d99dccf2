"""PV-regularised image denoising and bilevel learning of the weight and operator."""

from .grid import hessian_adjoint, hessian_stack, n_channels
from .imageio import add_noise, desk_pair, read_image, synth, write_image
from .operator import (
    OperatorFamily,
    OperatorSpec,
    adjoint,
    apply,
    continuity_modulus,
    full_shear_family,
    identity_family,
    identity_spec,
    linf_distance,
    shear_spec,
    sigma_p_admissible,
    upper_shear_family,
)
from .regularizer import (
    dual_ball_project,
    dual_certificate,
    kernel_project_gradient,
    pv,
)
from .solver import DenoiseResult, SolverParams, denoise, duality_gap, operator_norm
from .trainer import (
    AssessmentRecord,
    FiniteGround,
    TrainingPair,
    assess,
    build_ground,
    error_bound,
    grid_search,
    landscape,
    run_workflow,
    sobolev_norm,
)

__version__ = "0.1.0"

__all__ = [
    "AssessmentRecord",
    "DenoiseResult",
    "FiniteGround",
    "OperatorFamily",
    "OperatorSpec",
    "SolverParams",
    "TrainingPair",
    "add_noise",
    "adjoint",
    "apply",
    "assess",
    "build_ground",
    "continuity_modulus",
    "denoise",
    "desk_pair",
    "dual_ball_project",
    "dual_certificate",
    "duality_gap",
    "error_bound",
    "full_shear_family",
    "grid_search",
    "hessian_adjoint",
    "hessian_stack",
    "identity_family",
    "identity_spec",
    "kernel_project_gradient",
    "landscape",
    "linf_distance",
    "n_channels",
    "operator_norm",
    "pv",
    "read_image",
    "run_workflow",
    "shear_spec",
    "sigma_p_admissible",
    "sobolev_norm",
    "synth",
    "upper_shear_family",
    "write_image",
]
