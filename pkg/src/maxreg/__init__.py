"""Desk-scale laboratory for non-autonomous parabolic regularity experiments."""

from .grids import SpaceGrid, TimeGrid
from .discretization import (
    CoefficientField,
    DiscreteOperator,
    assemble_operator,
    ellipticity_check,
    vmo_modulus,
)
from .operator_calculus import (
    OperatorFamily,
    RegularityCertificate,
    SectorReport,
    drift_kernel,
    frac_power,
    propagation_kernel,
    sectoriality_report,
    semigroup,
    theta_norm,
    theta_stability_constant,
)
from .norms import (
    RegularityReport,
    Trajectory,
    bochner_norm,
    frac_sobolev_norm,
    holder_modulus,
    trace_norm,
)
from .volterra import (
    VolterraSystem,
    apply_drift,
    apply_propagation,
    extend_initial_value,
    solve_integral_equation,
    solve_timestepper,
    solve_with_initial_value,
)
from .exponents import ExponentQuery, PlanResult, bootstrap_ladder, mr_admissible
from .mr_diagnostics import critical_sweep, kato_ratio, mr_constant
from .quasilinear import (
    CoefficientMap,
    QlpProblem,
    composition_regularity,
    small_data_threshold,
    solve_qlp,
)
from .counterexample import (
    CriticalExample,
    critical_frac_norm,
    inner_integral_bounds,
    sin_increment_bound_check,
    truncated_derivative_norm,
)

__version__ = "0.1.0"
