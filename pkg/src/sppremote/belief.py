"""Weighted particle clouds for the conditional state laws.

A cloud carries the conditional distribution of the particle state given the
transmission history: the process update advances every particle with its
own fixed bank draw (predictive law), and the policy update masks out the
transmitting particles and renormalizes (conditioning on "no transmission").
The optimal no-transmission estimate is the cloud's weighted position mean
paired with its circular heading mean.

Clouds are immutable; updates return new clouds.  Weight reductions use
numpy's fixed-order summation so results are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import NoiseBank, step_many
from .errors import DegeneracyError
from .geometry import State, wrap_angle

WEIGHT_TOL = 1e-12
RESULTANT_TOL = 1e-12
DEFAULT_EPS_DEG = 1e-6


@dataclass(frozen=True)
class ParticleCloud:
    """Weighted sample representation of a state distribution.

    ``states`` is (P, 3) with wrapped headings; ``weights`` is (P,),
    nonnegative, and sums to one when ``normalized``.
    """

    states: np.ndarray
    weights: np.ndarray
    normalized: bool = field(init=False)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if states.ndim != 2 or states.shape[1] != 3 or states.shape[0] < 1:
            raise ValueError(f"states must be (P, 3) with P >= 1, got {states.shape}")
        if weights.shape != (states.shape[0],):
            raise ValueError("weights must match the particle count")
        if np.any(np.isnan(weights)) or np.any(weights < 0):
            raise ValueError("weights must be nonnegative and free of NaN")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(
            self, "normalized", bool(abs(float(np.sum(weights)) - 1.0) <= WEIGHT_TOL)
        )
        states.setflags(write=False)
        weights.setflags(write=False)

    def __len__(self) -> int:
        return self.states.shape[0]

    @staticmethod
    def point_mass(x: State, count: int = 1) -> "ParticleCloud":
        """``count`` coincident particles of equal weight at ``x``."""
        states = np.tile(x.as_array(), (count, 1))
        return ParticleCloud(states, np.full(count, 1.0 / count))


def process_update(cloud: ParticleCloud, bank: NoiseBank, stage: int) -> ParticleCloud:
    """Advance each particle with its (stage, index)-keyed bank draw.

    Weights are untouched: this realizes the predictive law from the
    filtered one.
    """
    if not cloud.normalized:
        raise ValueError("cloud must be normalized")
    n = len(cloud)
    if bank.count < n:
        raise ValueError(f"bank holds {bank.count} draws per stage, need {n}")
    moved = step_many(cloud.states, bank.speeds[stage, :n], bank.turns[stage, :n])
    return ParticleCloud(moved, cloud.weights)


def policy_update(
    cloud: ParticleCloud,
    no_transmit_test,
    stage=None,
    eps_deg: float = DEFAULT_EPS_DEG,
) -> tuple[ParticleCloud, float]:
    """Condition on "no transmission": mask, renormalize, report survival.

    ``no_transmit_test`` maps an (n, 3) state array to a boolean mask.
    ``survival`` is the pre-normalization surviving mass, the estimate of
    the per-stage no-transmission probability.  Surviving mass below
    ``eps_deg`` raises :class:`DegeneracyError` naming ``stage``.
    """
    if not cloud.normalized:
        raise ValueError("cloud must be normalized")
    mask = np.asarray(no_transmit_test(cloud.states), dtype=bool)
    masked = np.where(mask, cloud.weights, 0.0)
    survival = float(np.sum(masked))
    if survival < eps_deg:
        raise DegeneracyError(stage, survival)
    return ParticleCloud(cloud.states, masked / survival), survival


def mean_position(cloud: ParticleCloud) -> tuple[float, float]:
    """Weighted position means: the distortion-optimal location estimate."""
    if not cloud.normalized:
        raise ValueError("cloud must be normalized")
    return (
        float(np.sum(cloud.weights * cloud.states[:, 0])),
        float(np.sum(cloud.weights * cloud.states[:, 1])),
    )


def circular_mean_heading(cloud: ParticleCloud, fallback: float) -> float:
    """Circular mean of the headings, the optimal heading estimate.

    Returns ``fallback`` (wrapped) when the resultant vector vanishes, in
    which case every heading is equally good.
    """
    if not cloud.normalized:
        raise ValueError("cloud must be normalized")
    s = float(np.sum(cloud.weights * np.sin(cloud.states[:, 2])))
    c = float(np.sum(cloud.weights * np.cos(cloud.states[:, 2])))
    if s * s + c * c <= RESULTANT_TOL:
        return wrap_angle(fallback)
    return wrap_angle(np.arctan2(s, c))


def mean_state(cloud: ParticleCloud, fallback_heading: float = 0.0) -> State:
    """Convenience: the (position mean, circular heading mean) estimate."""
    p1, p2 = mean_position(cloud)
    return State(p1, p2, circular_mean_heading(cloud, fallback_heading))
