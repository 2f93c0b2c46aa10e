"""Random walks among Bernoulli obstacles: localization scales, polymer
measures, crossing weights, and the supporting spectral toolkit.

Set TRAPWALK_NUMBA=0 to force the pure-numpy backend, =1 to require numba;
unset, the jitted kernels are used when numba imports.
"""
from .backend import HAS_NUMBA, backend_name
from .detect import (
    CoarseGrainConfig,
    EventGReport,
    VacantBallReport,
    density_dichotomy_scan,
    density_scan_csv,
    detect_vacant_ball,
    empty_box_set,
    event_G,
    visit_statistics,
    volume_cost_check,
)
from .lattice import (
    Ball,
    Box,
    LatticeRegion,
    ModelParams,
    ObstacleField,
    SiteSet,
    compute_rho1_and_cdp,
    first_bessel_zero,
    nearest_site,
    plant_vacant_ball,
    sample_obstacles,
    unit_ball_volume,
)
from .lyapunov import (
    CrossingEstimate,
    DegenerateEstimateWarning,
    NormModel,
    classify_drift,
    critical_magnitude,
    crossing_probability,
    dist_beta,
    dual_norm,
    estimate_beta,
)
from .polymer import (
    ExactDistribution,
    McmcInvariantError,
    McmcSampler,
    PolymerWeight,
    annealed_survival_estimate,
    exact_endpoint_distribution,
    integrated_autocorr,
    mcmc_sampler,
    strategy_lower_bound,
)
from .spectral import (
    DirichletOperator,
    EigenConvergenceError,
    SpectralPair,
    faber_krahn_report,
    heat_kernel_floor,
    killed_heat_kernel,
    level_sets,
    principal_eigen,
    survival_exact,
)
from .walk import NEVER, HittingRecord, LatticePath, hitting_record, reverse, simulate

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "Box",
    "CoarseGrainConfig",
    "CrossingEstimate",
    "DegenerateEstimateWarning",
    "DirichletOperator",
    "EigenConvergenceError",
    "EventGReport",
    "ExactDistribution",
    "HAS_NUMBA",
    "HittingRecord",
    "LatticePath",
    "LatticeRegion",
    "McmcInvariantError",
    "McmcSampler",
    "ModelParams",
    "NEVER",
    "NormModel",
    "ObstacleField",
    "PolymerWeight",
    "SiteSet",
    "SpectralPair",
    "VacantBallReport",
    "annealed_survival_estimate",
    "backend_name",
    "classify_drift",
    "compute_rho1_and_cdp",
    "critical_magnitude",
    "crossing_probability",
    "density_dichotomy_scan",
    "density_scan_csv",
    "detect_vacant_ball",
    "dist_beta",
    "dual_norm",
    "empty_box_set",
    "estimate_beta",
    "event_G",
    "exact_endpoint_distribution",
    "faber_krahn_report",
    "first_bessel_zero",
    "heat_kernel_floor",
    "hitting_record",
    "integrated_autocorr",
    "killed_heat_kernel",
    "level_sets",
    "mcmc_sampler",
    "nearest_site",
    "plant_vacant_ball",
    "principal_eigen",
    "reverse",
    "sample_obstacles",
    "simulate",
    "strategy_lower_bound",
    "survival_exact",
    "unit_ball_volume",
    "visit_statistics",
    "volume_cost_check",
    "__version__",
]
