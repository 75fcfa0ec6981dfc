"""Collision-aware spectrum sharing for a two-phase relay network."""

from .access import (
    IntervalSet,
    access_plan,
    align_band,
    frame_interference,
    place_phase1,
    place_phase2_ergodic,
    place_phase2_frame,
)
from .ergodic import (
    ParameterPacket,
    TrainedPolicy,
    build_packet,
    inner_solution_ergodic,
    online_update,
    phase1_only_variant,
    theta_phase2_ergodic,
    train_offline,
)
from .estimators import ErgodicSharingPolicy, FrameSharingSolver
from .frame_solver import (
    DualVars,
    PowerRatios,
    SolverOptions,
    SolverReport,
    f_aux,
    inner_solution,
    power_ratios,
    ratio_phase1,
    ratios_phase2,
    solve_frame,
    solve_relay_free,
    solve_sensing_free,
    subgradient,
    theta_phase1,
    theta_phase2_frame,
)
from .netmodel import (
    Allocation,
    FadingParams,
    Nsi,
    SystemConfig,
    rate_crn,
    rate_r1,
    rate_r2,
    sample_channel,
    sample_nsi,
    sample_sensing,
)
from .traffic import (
    SamplePath,
    TrafficParams,
    collision_time,
    phi1,
    phi2_ergodic,
    phi2_frame,
    sample_path,
    stationary_active_prob,
    transition_prob,
)

__version__ = "0.1.0"
