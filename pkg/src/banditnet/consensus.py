"""Accelerated gossip consensus: round schedule, mix recurrence, full rounds.

The mix recurrence realizes the scaled Chebyshev polynomial of the weight
matrix.  After h steps every agent holds the i-th entry of

    p_h(W) v,   p_h(x) = T_h(x / |lambda_2|) / T_h(1 / |lambda_2|),

where T_h is the Chebyshev polynomial of the first kind.  p_h(1) = 1, so
exact consensus vectors are fixed points, and |p_h(mu)| <= 1/T_h(1/|lambda_2|)
for every non-consensus eigenvalue mu, which decays like
exp(-h * sqrt(2 log(1/|lambda_2|))).  Running for

    q(s) = ceil( log(2 N s) / sqrt(2 log(1/|lambda_2|)) )

rounds therefore shrinks the distance to the exact average below 1/s for
value vectors with entries in [-1, 1].

The h = 0 step is normalized through the halved leading coefficient
(c_0 = 1/2 during the step, doubled back afterwards), which makes the
generic three-term recurrence produce T_1 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError, ValidationError
from .graph import NetworkGraph

__all__ = [
    "MixState",
    "ConsensusResult",
    "comm_schedule",
    "init_mix",
    "mix_step",
    "run_consensus",
]

# Below this spectral gap plain averaging is exact (complete graphs) and the
# Chebyshev recurrence would divide by ~0, so a single W multiplication is
# used instead.
ZERO_GAP = 1e-12


@dataclass
class MixState:
    """State of the accelerated mix recurrence after ``step`` rounds.

    ``current``/``previous`` hold per-agent values (shape (N,) or (N, B)
    for B simultaneous vectors); ``c_curr``/``c_prev`` are the Chebyshev
    recurrence coefficients c_h, c_{h-1}.
    """

    current: np.ndarray
    previous: np.ndarray
    c_curr: float
    c_prev: float
    step: int


def comm_schedule(s: int, n: int, lambda2_abs: float) -> int:
    """Number of communication rounds for episode s.

    Returns ceil(log(2 n s) / sqrt(2 log(1/lambda2_abs))) with natural
    logarithms; 0 for a single agent; 1 when the spectral gap is numerically
    zero (one plain multiplication by W is already exact).
    """
    if s < 1:
        raise ValidationError(f"episode index must be >= 1, got {s}")
    if n < 1:
        raise ValidationError(f"agent count must be >= 1, got {n}")
    if n == 1:
        return 0
    if lambda2_abs >= 1.0:
        raise ValidationError(f"consensus impossible: |lambda_2| = {lambda2_abs} >= 1")
    if lambda2_abs <= ZERO_GAP:
        return 1
    rate = math.sqrt(2.0 * math.log(1.0 / lambda2_abs))
    return max(1, math.ceil(math.log(2.0 * n * s) / rate))


def init_mix(values: np.ndarray) -> MixState:
    """Initial mix state: previous values zero, c_{-1} = 0, c_0 halved."""
    current = np.array(values, dtype=float)
    return MixState(
        current=current,
        previous=np.zeros_like(current),
        c_curr=0.5,
        c_prev=0.0,
        step=0,
    )


def mix_step(state: MixState, graph: NetworkGraph) -> MixState:
    """Advance the recurrence one communication round.

    Each agent reads only its own and its neighbors' current values (the
    multiplication by W touches exactly the W_ij > 0 entries).  Constant
    vectors are preserved bit-exactly up to floating point: the update
    coefficients sum to 1 by the recurrence that defines c_{h+1}.
    """
    if state is None or state.current is None:
        raise UsageError("mix_step requires an initialized MixState")
    lam = graph.lambda2_abs
    if lam <= ZERO_GAP:
        raise UsageError(
            "mix_step is undefined for a (numerically) zero spectral gap; "
            "use run_consensus, which falls back to one plain W multiplication"
        )
    z = (2.0 / lam) * (graph.weights @ state.current)
    c_next = 2.0 * state.c_curr / lam - state.c_prev
    new_values = (state.c_curr / c_next) * z - (state.c_prev / c_next) * state.previous
    # h = 0 normalization: the halved c_0 enters the step above, then is
    # doubled back before serving as c_{h-1} for the next round.
    c_handoff = 2.0 * state.c_curr if state.step == 0 else state.c_curr
    return MixState(
        current=new_values,
        previous=state.current,
        c_curr=c_next,
        c_prev=c_handoff,
        step=state.step + 1,
    )


@dataclass
class ConsensusResult:
    """Per-agent estimates of the network average after a consensus phase."""

    estimates: np.ndarray
    true_average: float | np.ndarray
    rounds_used: int


def run_consensus(local_values: np.ndarray, graph: NetworkGraph, rounds: int) -> ConsensusResult:
    """Run the communication phase on one (or a batch of) value vector(s).

    ``local_values`` has shape (N,) or (N, B).  For n = 1 or rounds = 0 the
    estimates are the inputs unchanged; for a zero spectral gap a single
    plain multiplication by W is used (exact on complete graphs).
    """
    values = np.asarray(local_values, dtype=float)
    if values.shape[0] != graph.n_agents:
        raise ValidationError(
            f"got {values.shape[0]} values for {graph.n_agents} agents"
        )
    true_average = values.mean(axis=0)
    if graph.n_agents == 1 or rounds == 0:
        return ConsensusResult(values.copy(), true_average, 0)
    if graph.lambda2_abs <= ZERO_GAP:
        return ConsensusResult(graph.weights @ values, true_average, 1)
    state = init_mix(values)
    for _ in range(rounds):
        state = mix_step(state, graph)
    return ConsensusResult(state.current, true_average, rounds)
