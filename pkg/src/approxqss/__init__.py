"""Leakage and recovery analysis for approximate threshold quantum secret sharing."""

__version__ = "0.1.0"

from .analysis import (
    AnalysisReport,
    SetReport,
    adversary_strength,
    analyze,
    diamond_bounds,
    fvg_channel_check,
    reconstructability_dual,
    reconstructability_primal,
    secrecy_epsilon,
    verify_duality,
)
from .channels import KrausChannel, complementary, compose, kraus_to_choi, tensor
from .divergences import (
    capacity_ea,
    capacity_renyi_half,
    mutual_info_renyi_half,
    mutual_info_vn,
    q_function,
    sandwiched_renyi,
)
from .qss import (
    AttackModel,
    AuthorizedSet,
    ThresholdScheme,
    build_cgl_2_3_scheme,
    builtin_attack,
    effective_channels,
    min_authorized_sets,
    product_attack,
)
from .saddle import (
    SaddleResult,
    SolverConfig,
    dykstra_cptp_project,
    min_rho_q,
    optimize_recovery,
    saddle_max_sigma_min_rho,
    worst_case_input,
)

__all__ = [
    "__version__",
    "adversary_strength",
    "AnalysisReport",
    "analyze",
    "AttackModel",
    "AuthorizedSet",
    "build_cgl_2_3_scheme",
    "builtin_attack",
    "capacity_ea",
    "capacity_renyi_half",
    "complementary",
    "compose",
    "diamond_bounds",
    "dykstra_cptp_project",
    "effective_channels",
    "fvg_channel_check",
    "kraus_to_choi",
    "KrausChannel",
    "min_authorized_sets",
    "min_rho_q",
    "mutual_info_renyi_half",
    "mutual_info_vn",
    "optimize_recovery",
    "product_attack",
    "q_function",
    "reconstructability_dual",
    "reconstructability_primal",
    "saddle_max_sigma_min_rho",
    "SaddleResult",
    "sandwiched_renyi",
    "secrecy_epsilon",
    "SetReport",
    "SolverConfig",
    "tensor",
    "ThresholdScheme",
    "verify_duality",
    "worst_case_input",
]
