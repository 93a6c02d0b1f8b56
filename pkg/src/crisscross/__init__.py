"""Crisscross network toolkit: parameters, workload geometry, threshold
policies, event simulation, Brownian comparison, and cost experiments."""
from .bcp import (
    AdmissibilityReport,
    CostEstimate,
    LimitBm,
    RbmPath,
    admissibility_audit,
    estimate_discounted_marginals,
    estimate_j_star,
    optimal_queue_path,
    simulate_rbm,
)
from .experiments import (
    DiagnosticsReport,
    DiscountedCostRun,
    LdCheckRow,
    PathCost,
    SweepConfig,
    SweepResult,
    collapse_bound,
    convergence_sweep,
    discounted_cost,
    estimate_cost,
    fluid_allocation_gap,
    ld_check,
    replication_seed,
    run_diagnostics,
)
from .params import (
    Config,
    ConfigError,
    NetworkLimits,
    RNetwork,
    ThresholdConstants,
    ValidationReport,
    compute_threshold_constants,
    kappa_bound,
    load_config,
    make_r_network,
    poisson_rate_function,
    validate_limits,
    varsigma2,
)
from .policies import (
    BUFFER1,
    BUFFER2,
    BUFFER3,
    IDLE,
    POLICY_NAMES,
    Action,
    PolicyAuditError,
    indicator_form_audit,
    make_policy,
    priority_decide,
    threshold_decide,
)
from .simulate import (
    ConservationReport,
    ScaledTrajectory,
    SimState,
    Trajectory,
    check_conservation,
    diffusion_scale,
    fluid_scale,
    simulate,
    write_scaled_csv,
    write_trajectory_csv,
)
from .workload import (
    LpSolution,
    SamplePath,
    WorkloadMatrix,
    effective_cost,
    effective_cost_coefficients,
    lp_oracle,
    skorohod_reflect,
    skorohod_regulator,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # parameters
    "NetworkLimits",
    "RNetwork",
    "ThresholdConstants",
    "ValidationReport",
    "Config",
    "ConfigError",
    "validate_limits",
    "make_r_network",
    "poisson_rate_function",
    "varsigma2",
    "compute_threshold_constants",
    "kappa_bound",
    "load_config",
    # workload geometry
    "WorkloadMatrix",
    "LpSolution",
    "SamplePath",
    "effective_cost",
    "effective_cost_coefficients",
    "lp_oracle",
    "skorohod_reflect",
    "skorohod_regulator",
    # policies
    "Action",
    "IDLE",
    "BUFFER1",
    "BUFFER2",
    "BUFFER3",
    "threshold_decide",
    "priority_decide",
    "indicator_form_audit",
    "PolicyAuditError",
    "make_policy",
    "POLICY_NAMES",
    # simulation
    "SimState",
    "Trajectory",
    "ScaledTrajectory",
    "ConservationReport",
    "simulate",
    "fluid_scale",
    "diffusion_scale",
    "check_conservation",
    "write_trajectory_csv",
    "write_scaled_csv",
    # Brownian comparison
    "LimitBm",
    "RbmPath",
    "CostEstimate",
    "AdmissibilityReport",
    "simulate_rbm",
    "optimal_queue_path",
    "estimate_j_star",
    "estimate_discounted_marginals",
    "admissibility_audit",
    # experiments
    "PathCost",
    "DiscountedCostRun",
    "SweepConfig",
    "SweepResult",
    "DiagnosticsReport",
    "LdCheckRow",
    "discounted_cost",
    "estimate_cost",
    "convergence_sweep",
    "run_diagnostics",
    "collapse_bound",
    "ld_check",
    "fluid_allocation_gap",
    "replication_seed",
]
