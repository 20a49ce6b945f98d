"""Three-commodity exchange economy under the price adjustment family dp_i/dt = p_i^gamma E_i(p)."""

from .economy import (
    EQUILIBRIUM,
    EndowmentMatrix,
    EndowmentParams,
    PriceVector,
    consumption,
    demand_shares,
    excess_demand,
    from_params,
    to_params,
    utility,
)
from .errors import ScarfHirotaError
from .stability import (
    LocalClass,
    StabilityReport,
    classify,
    criteria,
    edge_fixed_point,
    edge_min_excess,
    first_integral,
    jacobian_at_equilibrium,
    jacobian_eigenvalues,
    lyapunov,
)
from .dynamics import IntegrationConfig, Termination, TerminationKind, Trajectory, detect_limit_cycle, integrate

__version__ = "0.1.0"

__all__ = [
    "EQUILIBRIUM",
    "EndowmentMatrix",
    "EndowmentParams",
    "IntegrationConfig",
    "LocalClass",
    "PriceVector",
    "ScarfHirotaError",
    "StabilityReport",
    "Termination",
    "TerminationKind",
    "Trajectory",
    "classify",
    "consumption",
    "criteria",
    "demand_shares",
    "detect_limit_cycle",
    "edge_fixed_point",
    "edge_min_excess",
    "excess_demand",
    "first_integral",
    "from_params",
    "integrate",
    "jacobian_at_equilibrium",
    "jacobian_eigenvalues",
    "lyapunov",
    "to_params",
    "utility",
]
