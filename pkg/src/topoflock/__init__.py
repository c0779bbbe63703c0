"""topoflock: leader-follower swarm dynamics with topological interactions.

Two simulation backends share one model: a microscopic forward-Euler
integrator where every agent interacts with its M nearest neighbors, and a
mesoscopic stochastic particle method where each agent takes one random
binary interaction per step from a topological ball estimated on a k-d-tree
over a population subsample.  Leadership labels switch stochastically under
constant, density-dependent, or target-oriented transition rates.
"""

from .core import (
    AgentState,
    ConfigError,
    ConstantRates,
    DensityRates,
    Dist,
    ForceParams,
    InitGroup,
    Label,
    RateSpec,
    ScenarioConfig,
    SimParams,
    SimulationDiverged,
    SingularPairError,
    SourceSpec,
    SwarmState,
    TargetRates,
    initial_state,
    make_rng,
    micro_neighbor_count,
    parse_config,
    parse_config_text,
    subsample_neighbor_count,
    validate_config,
    write_config,
)
from .micro import micro_step, run_micro
from .meso import StepStreams, nanbu_step, run_meso

__version__ = "0.1.0"
