"""pressure-lab: pressure regularity experiments for 2D steady incompressible
flow in smooth bounded domains.

Layout:
  geometry  boundary curves, collar (geodesic) charts, cutoff profiles
  fields    grid fields, analytic field families, collar operators
  norms     Holder / sup / negative-Sobolev estimators
  elliptic  Neumann, Dirichlet and collar-slab Poisson solvers
  mollify   tangency- and divergence-preserving regularization
  pressure  pressure solves, collar identities, boundary traces, eta studies
  cli       configuration-driven runner (verify | solve | study)
"""

from .geometry import (
    BoundaryCurve,
    CutoffProfile,
    GeodesicChart,
    GeometryError,
    OutOfCollarError,
    build_curve,
    build_cutoffs,
    default_cutoffs,
    reach_estimate,
)
from .fields import (
    FieldError,
    GridField,
    InteriorChart,
    RadialFlow,
    RoughStream,
    StreamFunction,
    make_rough_stream,
    radial_flow,
    rhs_double_divergence,
    stream_to_velocity,
)
from .norms import (
    HolderEstimate,
    NegSobolevNorm,
    NormError,
    PairPlan,
    build_pair_plan,
    c0_distance,
    h_minus2_norm,
    holder_norm,
)
from .elliptic import (
    LinearSolveReport,
    SlabOperator,
    SolverError,
    green_kernel_image,
    solve_dirichlet_stream,
    solve_neumann,
    solve_slab_mixed,
)
from .mollify import (
    MollifierKernel,
    MollifyError,
    RegularizedVelocity,
    mollify_velocity,
    odd_extend,
    recover_stream,
    split_stream,
)
from .pressure import (
    EstimateLedger,
    PressureError,
    PressureSolution,
    SplitPb,
    TraceCurve,
    bc_equivalence_check,
    boundary_trace,
    collar_flux_residual,
    eta_study,
    sanss2_rhs,
    solve_pressure,
    split_Pb,
)

__all__ = [
    "EstimateLedger",
    "HolderEstimate",
    "LinearSolveReport",
    "MollifierKernel",
    "MollifyError",
    "NegSobolevNorm",
    "NormError",
    "PairPlan",
    "PressureError",
    "PressureSolution",
    "RegularizedVelocity",
    "SlabOperator",
    "SolverError",
    "SplitPb",
    "TraceCurve",
    "bc_equivalence_check",
    "boundary_trace",
    "build_pair_plan",
    "c0_distance",
    "collar_flux_residual",
    "eta_study",
    "green_kernel_image",
    "h_minus2_norm",
    "holder_norm",
    "mollify_velocity",
    "odd_extend",
    "recover_stream",
    "sanss2_rhs",
    "solve_dirichlet_stream",
    "solve_neumann",
    "solve_pressure",
    "solve_slab_mixed",
    "split_Pb",
    "split_stream",
    "BoundaryCurve",
    "CutoffProfile",
    "FieldError",
    "GeodesicChart",
    "GeometryError",
    "GridField",
    "InteriorChart",
    "OutOfCollarError",
    "RadialFlow",
    "RoughStream",
    "StreamFunction",
    "build_curve",
    "build_cutoffs",
    "default_cutoffs",
    "make_rough_stream",
    "radial_flow",
    "reach_estimate",
    "rhs_double_divergence",
    "stream_to_velocity",
]

__version__ = "0.1.0"
