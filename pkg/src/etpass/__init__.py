"""Passivity certificates and event-triggered simulation for networked feedback loops.

Certify QSR-dissipativity, finite-gain L2 stability, and passivity of a
plant/controller feedback interconnection whose outputs travel through
event-triggered samplers and zero-order holds, then simulate the loop and
verify the certified supply-rate inequalities along the trajectory.
"""

from .certificates import (
    Condition,
    IndexBounds,
    PassivityIndices,
    QsrCertificate,
    StabilityReport,
    Topology,
    TriggerBudget,
    beta_nu_c,
    beta_nu_p,
    interconnection_index_bounds,
    l2_stable,
    max_trigger_level,
    qsr_certificate,
    validate_trigger_level,
    w1_yp_index_bounds,
    w1_yp_passive,
)
from .dynamics import (
    REGISTRY,
    ContinuousSystem,
    DimensionError,
    DivergenceError,
    default_registry,
    evaluate_deriv,
    evaluate_output,
    get_model,
    integrate_open_loop,
    model_names,
    rk4_step,
)
from .eventsim import (
    AlgebraicLoopError,
    CommStats,
    DetectorStats,
    EventLog,
    Scenario,
    Trace,
    comm_stats,
    compiled_available,
    detector_check,
    simulate,
    trace_to_csv,
    validate_scenario,
)
from .signals import Constant, SignalSpec, Sinusoid, Step, WhiteNoise, Zero, sample_signal

__version__ = "0.1.0"
