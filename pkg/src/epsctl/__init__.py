"""Invariant-ellipsoid analysis and eps-optimal synthesis for discrete-time
linear systems under bounded disturbances."""

__version__ = "0.1.0"

from .epsnorm import AlphaCurve, EpsNormResult, alpha_sweep, eps_alpha_norm, eps_norm
from .errors import EpsCtlError
from .simkit import (
    DisturbanceKind,
    DisturbanceSpec,
    Trajectory,
    containment_stats,
    ellipsoid_boundary_points,
    gen_disturbance,
    output_l1_norm,
    simulate,
)
from .solvers import (
    RiccatiSolution,
    solve_dare_control,
    solve_dare_filter,
    solve_p_alpha,
    solve_q_alpha,
    solve_stein,
)
from .synthesis import (
    gain_K,
    gain_L,
    optimize_synthesis,
    reduced_series_norm,
    synth_observer,
    synth_output_feedback,
    synth_state_feedback,
)
from .sysmodel import (
    CertKind,
    EllipsoidCert,
    FilterPlant,
    LtiSystem,
    OutputFeedbackPlant,
    StateFeedbackPlant,
    SynthesisResult,
    cl_observer,
    cl_output_feedback,
    cl_state_feedback,
    spectral_radius,
    validate_structure,
)
