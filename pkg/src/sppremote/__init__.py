"""Remote state estimation of a self-propelled planar particle.

Co-designs threshold transmission policies and state estimators for a
costly link, simulates the particle, and evaluates assembled schemes on
simulated or ingested trajectories.
"""

from .belief import (
    ParticleCloud,
    circular_mean_heading,
    mean_position,
    mean_state,
    policy_update,
    process_update,
)
from .dynamics import (
    NoiseBank,
    SppModel,
    make_noise_bank,
    paper_model,
    sample_step,
    simulate,
    step,
)
from .errors import (
    AssemblyError,
    DegeneracyError,
    FitError,
    HorizonMismatchError,
    ParseError,
    ProtocolError,
    TrackValidationError,
)
from .geometry import (
    ORIGIN,
    State,
    distance,
    distance_squared,
    from_relative,
    to_relative,
    wrap_angle,
)
from .noise import (
    WeibullParams,
    WrappedCauchyParams,
    wc_mle,
    wc_pdf,
    wc_sample,
    weibull_mle,
    weibull_pdf,
    weibull_sample,
)
from .ingestion import Track, extract_increments, fit_model, load_track
from .runtime import (
    EpisodeReport,
    LinkState,
    SchemeTable,
    assemble,
    estimator_output,
    run_episode,
    sensing_decide,
)
from .schemeio import RunConfig, read_scheme, write_scheme
from .solver import (
    ChainSolution,
    GridGeometry,
    SolverConfig,
    StageSolution,
    SubproblemSolution,
    ValueGrid,
    best_response_estimates,
    build_value_grid,
    continuation_value,
    evaluate_G,
    grid_geometry,
    no_transmit_test,
    solve_chain,
    solve_subproblem,
    strict_nondegeneracy_report,
)

__version__ = "0.1.0"
