"""Output-feedback stabilization of possibly non-minimum-phase plants via an
extended high-gain observer cascaded with an extended Kalman filter.

The library assembles, integrates and instruments two closed loops: the
reduced loop (plant + exact-measurement Kalman filter, the design target)
and the full output-feedback loop (plant + high-gain observer + Kalman
filter), and measures how the latter recovers the former as the observer
time-scale parameter epsilon shrinks.
"""

__version__ = "0.1.0"

from .controller import (
    FeedbackLaw,
    SaturationConfig,
    StateFeedbackRun,
    example_control,
    example_feedback,
    lift_saturated,
    smooth_sat,
    standard_sat,
    state_feedback_rollout,
    suggest_saturation,
)
from .numerics import (
    HURWITZ_TOL,
    IntegrationError,
    OdeResult,
    VectorField,
    companion_lambda,
    hurwitz_check,
    integrate_fixed,
    rk4_step,
    solve_lyapunov,
)
from .observers import (
    EhgoGains,
    EkfWeights,
    ObserverState,
    PdSummary,
    ekf_gain,
    ekf_rhs,
    ehgo_gain,
    ehgo_rhs,
    pd_monitor,
    riccati_rhs,
    validate_phi1,
)
from .simulate import (
    DEFAULT_RECORD_DT,
    PeakingReport,
    RecoveryReport,
    SimConfig,
    SimulationError,
    SystemBundle,
    Trajectory,
    epsilon_sweep,
    get_bundle,
    lyapunov_monitors,
    peaking_report,
    recovery_metric,
    register_system,
    registered_systems,
    resolve_config,
    run_simulation,
    scaled_error_coords,
    simulate_output_feedback,
    simulate_reduced,
)
from .systems import (
    NormalFormSystem,
    PlantState,
    chain_matrices,
    equilibrium_defect,
    example_system,
    plant_output,
    plant_rhs,
    virtual_output,
)

__all__ = [name for name in dir() if not name.startswith("_")]
