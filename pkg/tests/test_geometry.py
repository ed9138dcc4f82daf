import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sppremote.geometry import (
    ORIGIN,
    State,
    distance,
    distance_squared,
    distance_squared_many,
    frobenius_distance_squared,
    from_relative,
    to_relative,
    wrap_angle,
)

TWO_PI = 2.0 * math.pi

finite_angle = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
coord = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
states = st.builds(State, coord, coord, finite_angle)


class TestWrapAngle:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            (0.0, 0.0),
            (TWO_PI, 0.0),
            (-math.pi / 2, 3 * math.pi / 2),
            (5 * TWO_PI + 0.25, 0.25),
        ],
    )
    def test_known_values(self, raw, expected):
        assert wrap_angle(raw) == pytest.approx(expected, abs=1e-12)

    @given(finite_angle)
    def test_range_and_congruence(self, raw):
        w = wrap_angle(raw)
        assert 0.0 <= w < TWO_PI
        assert math.isclose(math.cos(w), math.cos(raw), abs_tol=1e-6)
        assert math.isclose(math.sin(w), math.sin(raw), abs_tol=1e-6)

    def test_vectorized(self):
        arr = np.array([0.0, TWO_PI, -math.pi / 2])
        out = wrap_angle(arr)
        assert np.allclose(out, [0.0, 0.0, 3 * math.pi / 2])
        assert np.all((0 <= out) & (out < TWO_PI))

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            wrap_angle(bad)


class TestState:
    def test_theta_canonicalized(self):
        assert State(0, 0, TWO_PI).theta == 0.0
        assert State(0, 0, -math.pi / 2).theta == pytest.approx(3 * math.pi / 2)

    def test_rejects_non_finite_position(self):
        with pytest.raises(ValueError):
            State(math.inf, 0, 0)

    def test_array_round_trip(self):
        x = State(1.5, -2.0, 0.75)
        assert State.from_array(x.as_array()) == x


class TestDistance:
    def test_identity(self):
        x = State(3.0, -1.0, 2.0)
        assert distance_squared(x, x) == 0.0
        assert distance(x, x) == 0.0

    def test_pure_translation(self):
        # 3-4-5 triangle, no heading difference
        assert distance_squared(ORIGIN, State(3, 4, 0)) == pytest.approx(25.0)
        assert distance(ORIGIN, State(3, 4, 0)) == pytest.approx(5.0)

    def test_pure_rotation(self):
        # half-turn: Frobenius expansion gives 4 * (1 - cos(pi)) = 8
        assert distance_squared(ORIGIN, State(0, 0, math.pi)) == pytest.approx(8.0)
        assert distance(ORIGIN, State(0, 0, math.pi)) == pytest.approx(2 * math.sqrt(2))

    @given(states, states)
    @settings(max_examples=300)
    def test_matches_matrix_oracle(self, a, b):
        direct = frobenius_distance_squared(a, b)
        assert distance_squared(a, b) == pytest.approx(direct, rel=1e-9, abs=1e-9)

    @given(states, states)
    @settings(max_examples=100)
    def test_symmetry(self, a, b):
        assert distance_squared(a, b) == distance_squared(b, a)

    @given(states, states, states)
    @settings(max_examples=100)
    def test_triangle_inequality(self, a, b, c):
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9

    def test_translation_invariance_exact_on_integers(self):
        # integer coordinates stay exact in binary floating point
        a, b = State(3, 7, 1.25), State(-2, 5, 0.5)
        for d1, d2 in [(10, -4), (1024, 512), (-7, 33)]:
            shifted = distance_squared(
                State(a.p1 + d1, a.p2 + d2, a.theta), State(b.p1 + d1, b.p2 + d2, b.theta)
            )
            assert shifted == distance_squared(a, b)

    @given(states, states, coord, coord)
    @settings(max_examples=100)
    def test_translation_invariance_generic(self, a, b, d1, d2):
        shifted = distance_squared(
            State(a.p1 + d1, a.p2 + d2, a.theta), State(b.p1 + d1, b.p2 + d2, b.theta)
        )
        assert shifted == pytest.approx(distance_squared(a, b), rel=1e-9, abs=1e-9)

    def test_many_matches_scalar(self, rng):
        ref = State(0.5, -0.25, 1.0)
        arr = np.column_stack(
            [rng.normal(size=50), rng.normal(size=50), rng.uniform(0, TWO_PI, 50)]
        )
        batch = distance_squared_many(arr, ref)
        for row, d2 in zip(arr, batch):
            assert d2 == pytest.approx(distance_squared(State(*row), ref), rel=1e-12)


class TestRelativeFrames:
    def test_self_anchor(self):
        x = State(2.0, -3.0, 1.1)
        rel = to_relative(x, x)
        assert (rel.p1, rel.p2, rel.theta) == (0.0, 0.0, 0.0)

    def test_identity_anchor(self):
        x = State(2.0, -3.0, 1.1)
        assert to_relative(ORIGIN, x) == x

    def test_hand_computed_case(self):
        # anchor heading pi/2 turns a +p2 offset into a +p1 offset
        rel = to_relative(State(1, 0, math.pi / 2), State(1, 1, math.pi / 2))
        assert rel.p1 == pytest.approx(1.0, abs=1e-12)
        assert rel.p2 == pytest.approx(0.0, abs=1e-12)
        assert rel.theta == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_inverse(self):
        out = from_relative(State(1, 0, math.pi / 2), State(1, 0, 0))
        assert out.p1 == pytest.approx(1.0, abs=1e-12)
        assert out.p2 == pytest.approx(1.0, abs=1e-12)
        assert out.theta == pytest.approx(math.pi / 2, abs=1e-12)

    def test_identity_anchor_from_relative(self):
        rel = State(0.3, 0.4, 5.0)
        assert from_relative(ORIGIN, rel) == rel

    @given(states, states)
    @settings(max_examples=300)
    def test_mutual_inverse(self, anchor, x):
        back = from_relative(anchor, to_relative(anchor, x))
        assert back.p1 == pytest.approx(x.p1, abs=1e-8)
        assert back.p2 == pytest.approx(x.p2, abs=1e-8)
        # compare headings on the circle
        assert math.cos(back.theta - x.theta) == pytest.approx(1.0, abs=1e-12)

    def test_inverse_tight_on_moderate_inputs(self, rng):
        for _ in range(200):
            anchor = State(*rng.normal(0, 10, 2), rng.uniform(0, TWO_PI))
            x = State(*rng.normal(0, 10, 2), rng.uniform(0, TWO_PI))
            back = from_relative(anchor, to_relative(anchor, x))
            assert abs(back.p1 - x.p1) < 1e-12 * max(1.0, abs(x.p1)) + 1e-12
            assert abs(back.p2 - x.p2) < 1e-12 * max(1.0, abs(x.p2)) + 1e-12
            assert min(
                abs(back.theta - x.theta), TWO_PI - abs(back.theta - x.theta)
            ) < 1e-12

    @given(states, states)
    @settings(max_examples=100)
    def test_distance_preserved_under_anchoring(self, anchor, x):
        # re-anchoring is a rigid motion, so the distance to the anchor is kept
        rel = to_relative(anchor, x)
        assert distance_squared(ORIGIN, rel) == pytest.approx(
            distance_squared(anchor, x), rel=1e-6, abs=1e-6
        )
