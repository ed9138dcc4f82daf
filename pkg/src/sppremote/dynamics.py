"""Particle motion model: heading-increment steps and fixed noise banks.

One step advances the pose by a speed draw along the incremented heading:

    p1' = p1 + v cos(theta + phi)
    p2' = p2 + v sin(theta + phi)
    theta' = wrap(theta + phi)

Uniform draws come from counter-based (Philox) streams keyed by
(seed, stage), so any draw is reproducible without generating its
predecessors and fixed banks of draws support common-random-number
expectations in the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import State, wrap_angle
from .noise import WeibullParams, WrappedCauchyParams, wc_sample, weibull_sample

_U64 = np.uint64
_MASK64 = (1 << 64) - 1
# splitmix64 constants, used to fold several integers into one stream seed
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB


def derive_seed(*parts) -> int:
    """Fold integers into a 64-bit sub-seed (splitmix64 finalizer chain)."""
    z = 0
    for part in parts:
        z = (z + (int(part) & _MASK64) + _SM_GAMMA) & _MASK64
        z = ((z ^ (z >> 30)) * _SM_MUL1) & _MASK64
        z = ((z ^ (z >> 27)) * _SM_MUL2) & _MASK64
        z = z ^ (z >> 31)
    return z


def stage_uniforms(seed: int, stage: int, count: int) -> np.ndarray:
    """``count`` uniforms in the open interval (0, 1), keyed by (seed, stage)."""
    key = (int(seed) & _MASK64) | ((int(stage) & _MASK64) << 64)
    gen = np.random.Generator(np.random.Philox(key=key))
    raw = gen.integers(0, 1 << 53, size=count, dtype=np.uint64)
    return (raw.astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True, slots=True)
class SppModel:
    """Speed and turn noise families driving the motion model."""

    speed: WeibullParams
    turn: WrappedCauchyParams

    def mean_speed(self) -> float:
        return self.speed.mean()

    def rms_speed(self) -> float:
        return self.speed.rms()


def paper_model() -> SppModel:
    """Model fitted to the buffalo GPS track used in the experiments."""
    return SppModel(
        speed=WeibullParams(shape=1.35, scale=4.66),
        turn=WrappedCauchyParams(concentration=0.65, location=0.0),
    )


def step(x: State, v: float, phi: float) -> State:
    """Advance one stage with explicit speed and turn values."""
    if v < 0:
        raise ValueError(f"speed must be nonnegative, got {v}")
    heading = x.theta + phi
    return State(x.p1 + v * np.cos(heading), x.p2 + v * np.sin(heading), heading)


def step_many(states: np.ndarray, v: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Vectorized ``step`` over rows of an (n, 3) state array."""
    heading = states[:, 2] + phi
    out = np.empty_like(states)
    out[:, 0] = states[:, 0] + v * np.cos(heading)
    out[:, 1] = states[:, 1] + v * np.sin(heading)
    out[:, 2] = wrap_angle(heading)
    return out


def sample_step(model: SppModel, x: State, u1: float, u2: float) -> State:
    """One stochastic step driven by two uniform draws."""
    return step(x, weibull_sample(model.speed, u1), wc_sample(model.turn, u2))


def simulate(model: SppModel, x0: State, n_steps: int, seed: int) -> list[State]:
    """Simulate ``n_steps`` stages; returns the trajectory including ``x0``.

    Stage k consumes the two (seed, k)-keyed uniforms, so a trajectory is a
    pure function of (model, x0, n_steps, seed).
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    traj = [x0]
    for k in range(n_steps):
        u = stage_uniforms(seed, k, 2)
        traj.append(sample_step(model, traj[-1], u[0], u[1]))
    return traj


@dataclass(frozen=True)
class NoiseBank:
    """Per-stage fixed (speed, turn) draws for common-random-number averages.

    ``speeds`` and ``turns`` have shape (stages, count); entry (t, i) is the
    draw with index i for the transition into stage t, reproducible from
    (seed, t, i) alone.
    """

    speeds: np.ndarray
    turns: np.ndarray
    seed: int
    count: int = field(init=False)
    stages: int = field(init=False)

    def __post_init__(self):
        if self.speeds.shape != self.turns.shape or self.speeds.ndim != 2:
            raise ValueError("speeds/turns must share a (stages, count) shape")
        object.__setattr__(self, "stages", self.speeds.shape[0])
        object.__setattr__(self, "count", self.speeds.shape[1])
        self.speeds.setflags(write=False)
        self.turns.setflags(write=False)

    def max_displacement(self) -> float:
        """Largest single-step displacement present in the bank."""
        return float(np.max(self.speeds))


def make_noise_bank(model: SppModel, stages: int, count: int, seed: int) -> NoiseBank:
    """Draw a (stages x count) noise bank by inverse CDF from keyed uniforms.

    Stage t consumes 2*count uniforms from the (seed, t) stream: the first
    half drives speeds, the second half turns.  ``count`` = 1 reproduces
    ``sample_step``'s per-stage draws exactly.
    """
    if stages < 1 or count < 1:
        raise ValueError("stages and count must be positive")
    speeds = np.empty((stages, count))
    turns = np.empty((stages, count))
    for t in range(stages):
        u = stage_uniforms(seed, t, 2 * count)
        speeds[t] = weibull_sample(model.speed, u[:count])
        turns[t] = wc_sample(model.turn, u[count:])
    return NoiseBank(speeds=speeds, turns=turns, seed=int(seed))
