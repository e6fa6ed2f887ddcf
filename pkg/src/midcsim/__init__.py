"""Reduced-order simulator and coefficient optimizer for emergency DC power
support in multi-infeed LCC-HVDC systems.

The package composes four layers: a quasi-steady-state DC-link model, a
decentralized P-f droop controller per line, center-of-inertia frequency
dynamics per AC subsystem, and a global coordination layer that detects a
block fault and reallocates the lost power across the surviving lines by
solving a convex quadratic program.
"""

from .constants import F_NOMINAL_HZ, OMEGA_NOMINAL, S_BASE_MVA
from .coordinator import (
    BlockDetector,
    FaultInfo,
    OptimizationInput,
    OptimizationResult,
    brute_force_droop,
    chain_objective,
    constraint_residuals,
    detect_block,
    dispatch_coefficients,
    optimize_droop,
)
from .dc_link import (
    ConverterParams,
    DcLinkState,
    apply_block,
    calibrate_converter,
    current_for_power,
    max_inverter_power,
    power_to_current_order,
    solve_steady_state,
    step_power_tracking,
)
from .droop import DroopSettings, droop_power_order, update_coefficient
from .errors import (
    AlphaOutOfRangeError,
    BadIndexError,
    CosineDomainError,
    DcSolveError,
    InfeasibleError,
    InsufficientHistoryError,
    MidcError,
    NegativeCoefficientError,
    NonFiniteError,
    ScenarioParseError,
    StepTooLargeError,
    VoltageFloorError,
    ZeroStiffnessError,
)
from .events import BlockFault, CoefficientUpdate, FrequencyStep, LoadShed
from .grid import (
    SubsystemParams,
    SubsystemState,
    steady_state_frequency,
    subsystem_derivatives,
)
from .scenario_io import (
    bundled_scenario_path,
    bundled_scenarios,
    dumps_scenario,
    load_scenario,
    parse_scenario,
)
from .sim import (
    CoordinatorConfig,
    LineConfig,
    MidcScenario,
    SimConfig,
    SimulationTrace,
    compute_metrics,
    inject_frequency_step,
    run,
)

__version__ = "0.1.0"
