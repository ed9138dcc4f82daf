"""Deployable scheme: the sensing-unit/estimator pair over a trajectory.

The solved sub-problems are arranged into a table indexed by (last
transmission stage + 1, current stage).  At runtime both sides share only
the last transmitted state: the sensing unit re-anchors the current state
into that frame and applies the stage's threshold test; the estimator maps
the stage's relative-frame estimate back through the same anchor.  The
episode runner executes the pair step by step and keeps the distortion and
transmission ledger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, HorizonMismatchError, ProtocolError
from .geometry import State, distance, from_relative, to_relative
from .solver import ChainSolution, StageSolution, no_transmit_test

FORCE_TRANSMIT = "transmit"
FORCE_SILENT = "silent"


@dataclass(frozen=True)
class SchemeTable:
    """Per (k, j) relative-frame stage solutions, 1 <= k <= j <= N.

    Entry (k, j) applies when the last transmission happened at stage k-1
    and the current stage is j.
    """

    horizon: int
    entries: dict[tuple[int, int], StageSolution]
    c_prime: np.ndarray

    def entry(self, k: int, j: int) -> StageSolution:
        return self.entries[(k, j)]


def assemble(chain: ChainSolution, horizon: int, costs) -> SchemeTable:
    """Arrange a solved chain into the runtime lookup table."""
    costs = np.broadcast_to(np.asarray(costs, dtype=float), (horizon,))
    if len(chain.subproblems) != horizon:
        raise AssemblyError(
            f"chain holds {len(chain.subproblems)} sub-problems, horizon is {horizon}"
        )
    entries: dict[tuple[int, int], StageSolution] = {}
    for k in range(1, horizon + 1):
        sub = chain.subproblems[k - 1]
        if sub is None or len(sub.stages) != horizon - k + 1:
            raise AssemblyError(f"sub-problem {k} is missing or incomplete")
        for j in range(k, horizon + 1):
            entries[(k, j)] = sub.stages[j - k]
    return SchemeTable(horizon=horizon, entries=entries, c_prime=chain.c_prime.copy())


@dataclass
class LinkState:
    """What both sides know: the last transmission time and its state.

    ``tau = 0`` means nothing was transmitted yet; the anchor is then the
    initial state, which is common knowledge.
    """

    tau: int
    x_tau: State


def sensing_decide(table: SchemeTable, link: LinkState, k: int, x_k: State) -> int:
    """Transmit decision at stage k given the true state.

    Re-anchors the state at the last transmission and applies the stage's
    threshold test; returns 1 to transmit, 0 to stay silent.
    """
    if not (0 <= link.tau < k <= table.horizon):
        raise ValueError(f"inconsistent link: tau={link.tau}, k={k}")
    rel = to_relative(link.x_tau, x_k)
    silent = no_transmit_test(table.entry(link.tau + 1, k))(rel)
    return 0 if silent else 1


def estimator_output(
    table: SchemeTable, link: LinkState, k: int, r_k: int, payload: State | None = None
) -> State:
    """Estimator's state estimate at stage k.

    With a transmission the payload is the estimate; otherwise the stage's
    relative-frame estimate is re-anchored at the last transmitted state.
    The estimator never sees the true state when silent: only
    (tau, x_tau, k) enter this path.
    """
    if r_k == 1:
        if payload is None:
            raise ProtocolError("transmit flag set but no payload received")
        return payload
    if payload is not None:
        raise ProtocolError("payload received without a transmit flag")
    return from_relative(link.x_tau, table.entry(link.tau + 1, k).estimate)


@dataclass(frozen=True)
class EpisodeReport:
    """Step-by-step distortion/transmission ledger of one episode.

    ``distortions[i]`` is the state distortion at stage i+1 (zero whenever
    ``transmitted[i]``); the realized cost is the squared-distortion sum
    plus the charged transmission costs, by construction.
    """

    distortions: np.ndarray
    transmitted: np.ndarray
    costs: np.ndarray
    distortion_sq_sum: float = field(init=False)
    n_transmissions: int = field(init=False)
    realized_cost: float = field(init=False)

    def __post_init__(self):
        if not (len(self.distortions) == len(self.transmitted) == len(self.costs)):
            raise ValueError("per-step arrays must share one length")
        d2 = float(np.sum(self.distortions**2))
        paid = float(np.sum(self.costs[self.transmitted]))
        object.__setattr__(self, "distortion_sq_sum", d2)
        object.__setattr__(self, "n_transmissions", int(np.sum(self.transmitted)))
        object.__setattr__(self, "realized_cost", d2 + paid)


def run_episode(table: SchemeTable, trajectory, costs, force: str | None = None) -> EpisodeReport:
    """Run the sensing-unit/estimator pair over a full trajectory.

    ``trajectory`` holds N+1 states starting at the anchor state x_0.
    ``force`` overrides the policy for baseline runs: ``"transmit"`` sends
    every stage, ``"silent"`` never sends.
    """
    n_steps = len(trajectory) - 1
    if n_steps != table.horizon:
        raise HorizonMismatchError(
            f"trajectory has {n_steps} steps, scheme horizon is {table.horizon}"
        )
    if force not in (None, FORCE_TRANSMIT, FORCE_SILENT):
        raise ValueError(f"unknown force mode {force!r}")
    costs = np.broadcast_to(np.asarray(costs, dtype=float), (n_steps,))

    link = LinkState(tau=0, x_tau=trajectory[0])
    distortions = np.empty(n_steps)
    transmitted = np.zeros(n_steps, dtype=bool)
    for k in range(1, n_steps + 1):
        x_k = trajectory[k]
        if force == FORCE_TRANSMIT:
            r_k = 1
        elif force == FORCE_SILENT:
            r_k = 0
        else:
            r_k = sensing_decide(table, link, k, x_k)
        estimate = estimator_output(
            table, link, k, r_k, payload=x_k if r_k == 1 else None
        )
        distortions[k - 1] = distance(x_k, estimate)
        transmitted[k - 1] = bool(r_k)
        if r_k == 1:
            link = LinkState(tau=k, x_tau=x_k)
    return EpisodeReport(distortions=distortions, transmitted=transmitted, costs=costs.copy())
