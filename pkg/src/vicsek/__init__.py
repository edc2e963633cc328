"""Exact cable-system geometry and Sobolev-type functionals on the Vicsek fractal."""

from vicsek.geometry import (
    AddressError,
    BallApprox,
    CableGraph,
    CellMap,
    CENTER,
    CORNERS,
    DIAMETER,
    DIM_H,
    LatticePoint,
    MeasureContext,
    ResourceLimitError,
    alpha_p,
    ball_cells,
    ball_volume,
    build_graph,
    cell_map,
    distance,
    load_graph,
    save_graph,
)
from vicsek.functions import (
    CantorEdgeFunction,
    CellFunction,
    EdgeDensity,
    IntegralEstimate,
    PAFunction,
    cross_function,
    distance_function,
    interpolate,
    mu_integral,
    random_pa,
    tent_bouquet,
    vertex_hat,
    weak_gradient,
)
from vicsek.energy import (
    EnergyScan,
    Region,
    cell_energies,
    discrete_energy,
    discrete_energy_restricted,
    energy_infty,
    energy_limit,
    energy_sup_scan,
    gradient_norm,
    self_similarity_check,
    stream_energy,
)
from vicsek.ks import (
    KSReport,
    ResolutionError,
    ball_measure,
    besov_seminorm,
    bv_functional,
    default_radius_grid,
    ks_energy,
)
from vicsek.experiments import (
    ExperimentResult,
    FitResult,
    HajlaszReport,
    KFuncReport,
    MaximalReport,
    MorreyReport,
    PoincareReport,
    experiment_names,
    fit_loglog,
    gradient_scaling_fit,
    hajlasz_divergence,
    interpolant_sup_errors,
    k_functional_scan,
    maximal_function,
    morrey_check,
    phi_n,
    poincare_check,
    run_all,
    sharpness_fit,
)

__version__ = "0.1.0"

__all__ = [
    "AddressError",
    "BallApprox",
    "CableGraph",
    "CantorEdgeFunction",
    "CellFunction",
    "CellMap",
    "CENTER",
    "CORNERS",
    "DIAMETER",
    "DIM_H",
    "EdgeDensity",
    "EnergyScan",
    "ExperimentResult",
    "FitResult",
    "HajlaszReport",
    "IntegralEstimate",
    "KFuncReport",
    "KSReport",
    "LatticePoint",
    "MaximalReport",
    "MeasureContext",
    "MorreyReport",
    "PAFunction",
    "PoincareReport",
    "Region",
    "ResolutionError",
    "ResourceLimitError",
    "alpha_p",
    "ball_cells",
    "ball_measure",
    "ball_volume",
    "besov_seminorm",
    "build_graph",
    "bv_functional",
    "cell_energies",
    "cell_map",
    "cross_function",
    "default_radius_grid",
    "discrete_energy",
    "discrete_energy_restricted",
    "distance",
    "distance_function",
    "energy_infty",
    "energy_limit",
    "energy_sup_scan",
    "experiment_names",
    "fit_loglog",
    "gradient_norm",
    "gradient_scaling_fit",
    "hajlasz_divergence",
    "interpolant_sup_errors",
    "interpolate",
    "k_functional_scan",
    "ks_energy",
    "load_graph",
    "maximal_function",
    "morrey_check",
    "mu_integral",
    "phi_n",
    "poincare_check",
    "random_pa",
    "run_all",
    "save_graph",
    "self_similarity_check",
    "sharpness_fit",
    "stream_energy",
    "tent_bouquet",
    "vertex_hat",
    "weak_gradient",
    "__version__",
]
