"""Multi-agent stage-wise conservative linear bandits on communication graphs.

Subpackages by concern: graph topologies and spectral quantities
(:mod:`banditnet.graph`), accelerated gossip consensus
(:mod:`banditnet.consensus`), shared-design least squares and confidence
geometry (:mod:`banditnet.estimator`), instance generation and oracles
(:mod:`banditnet.environment`), safe action selection
(:mod:`banditnet.policy`), the episodic simulation loop
(:mod:`banditnet.simulator`) and the experiment harness / CLI
(:mod:`banditnet.harness`, :mod:`banditnet.cli`).
"""

from .consensus import ConsensusResult, MixState, comm_schedule, mix_step, run_consensus
from .environment import (
    BanditInstance,
    BaselineSchedule,
    generate_instance,
    instantaneous_regret,
    load_instance,
    observe_rewards,
    safety_margin,
    save_instance,
)
from .errors import (
    BanditNetError,
    ConfigurationError,
    GenerationError,
    UsageError,
    ValidationError,
)
from .estimator import (
    AgentEstimate,
    ConfidenceSpec,
    GramMatrix,
    confidence_radius,
    ellipsoid_norm,
    min_eigenvalue,
    new_gram,
    rls_estimate,
    update_gram,
)
from .graph import NetworkGraph, build_topology, metropolis_weights, spectral_gap
from .harness import (
    ExperimentConfig,
    expand_config,
    parse_config,
    run_ensemble,
    run_experiment,
)
from .policy import (
    ConservativeActionSpec,
    SafeSetView,
    compute_safe_set,
    conservative_action,
    excitation_threshold,
    select_ucb_action,
)
from .simulator import (
    BoundConstants,
    RoundRecord,
    RunTrace,
    run,
    run_episode,
    theoretical_bounds,
    write_trace_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
