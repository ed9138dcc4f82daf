"""Planar pose states, the squared-chordal metric on them, and frame changes.

A state is a planar position plus a heading in [0, 2*pi).  The distance
between two states is the Frobenius norm of the difference of their 3x3
homogeneous transforms, which collapses to the closed form

    d^2 = (p1a - p1b)^2 + (p2a - p2b)^2 + 4 * (1 - cos(ta - tb))

The relative-frame maps ``to_relative`` / ``from_relative`` re-anchor a state
at another state (rotate by the anchor heading, shift by the anchor
position); they are mutual inverses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(raw):
    """Reduce an angle (scalar or array) to the canonical range [0, 2*pi).

    Uses one conditional correction after the remainder so repeated wrapping
    does not accumulate error.
    """
    if not np.all(np.isfinite(raw)):
        raise ValueError(f"angle must be finite, got {raw!r}")
    wrapped = np.mod(raw, TWO_PI)
    # mod can return exactly 2*pi for tiny negative inputs
    wrapped = np.where(wrapped >= TWO_PI, wrapped - TWO_PI, wrapped)
    if np.ndim(raw) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True, slots=True)
class State:
    """Pose of the particle: position in meters, heading in radians.

    ``theta`` is wrapped to [0, 2*pi) on construction.
    """

    p1: float
    p2: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.p1) and math.isfinite(self.p2)):
            raise ValueError(f"non-finite position ({self.p1}, {self.p2})")
        object.__setattr__(self, "p1", float(self.p1))
        object.__setattr__(self, "p2", float(self.p2))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        """Return ``[p1, p2, theta]`` as a float array."""
        return np.array([self.p1, self.p2, self.theta], dtype=float)

    @staticmethod
    def from_array(arr) -> "State":
        return State(float(arr[0]), float(arr[1]), float(arr[2]))


ORIGIN = State(0.0, 0.0, 0.0)


def distance_squared(a: State, b: State) -> float:
    """Squared state distance (closed form of the 3x3 Frobenius expansion)."""
    dp1 = a.p1 - b.p1
    dp2 = a.p2 - b.p2
    return dp1 * dp1 + dp2 * dp2 + 4.0 * (1.0 - math.cos(a.theta - b.theta))


def distance(a: State, b: State) -> float:
    """State distance; symmetric and satisfies the triangle inequality."""
    return math.sqrt(distance_squared(a, b))


def distance_squared_many(states: np.ndarray, ref: State) -> np.ndarray:
    """Squared distances from each row of ``states`` (n, 3) to ``ref``."""
    dp1 = states[:, 0] - ref.p1
    dp2 = states[:, 1] - ref.p2
    return dp1 * dp1 + dp2 * dp2 + 4.0 * (1.0 - np.cos(states[:, 2] - ref.theta))


def to_relative(anchor: State, x: State) -> State:
    """Express ``x`` in the frame anchored at ``anchor``.

    Position is the displacement rotated by -anchor.theta; heading is the
    wrapped difference.
    """
    dp1 = x.p1 - anchor.p1
    dp2 = x.p2 - anchor.p2
    c = math.cos(anchor.theta)
    s = math.sin(anchor.theta)
    return State(c * dp1 + s * dp2, -s * dp1 + c * dp2, x.theta - anchor.theta)


def from_relative(anchor: State, rel: State) -> State:
    """Map a state expressed relative to ``anchor`` back to the world frame."""
    c = math.cos(anchor.theta)
    s = math.sin(anchor.theta)
    return State(
        c * rel.p1 - s * rel.p2 + anchor.p1,
        s * rel.p1 + c * rel.p2 + anchor.p2,
        rel.theta + anchor.theta,
    )


def frobenius_distance_squared(a: State, b: State) -> float:
    """Direct 3x3 homogeneous-transform expansion of the squared metric.

    Reference implementation kept as a test oracle for ``distance_squared``.
    """

    def homogeneous(x: State) -> np.ndarray:
        c, s = math.cos(x.theta), math.sin(x.theta)
        return np.array([[c, -s, x.p1], [s, c, x.p2], [0.0, 0.0, 1.0]])

    diff = homogeneous(a) - homogeneous(b)
    return float(np.sum(diff * diff))
