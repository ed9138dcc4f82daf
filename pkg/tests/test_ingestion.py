import math

import numpy as np
import pytest

from sppremote.dynamics import make_noise_bank, simulate
from sppremote.errors import ParseError, TrackValidationError
from sppremote.geometry import ORIGIN, State, wrap_angle
from sppremote.ingestion import (
    Track,
    extract_increments,
    fit_model,
    load_track,
    track_to_trajectory,
)

TWO_PI = 2.0 * math.pi


def write_xy(path, rows):
    lines = ["t_s,x_m,y_m"] + [f"{t},{x},{y}" for t, x, y in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def track_from_positions(positions, dt=1.0):
    positions = np.asarray(positions, dtype=float)
    from sppremote.ingestion import _derive_headings

    return Track(
        timestamps=dt * np.arange(len(positions)),
        positions=positions,
        headings=_derive_headings(positions),
    )


def trajectory_positions(model, n, seed):
    traj = simulate(model, ORIGIN, n, seed=seed)
    return np.array([[x.p1, x.p2] for x in traj])


class TestLoadTrack:
    def test_three_row_file(self, tmp_path):
        path = write_xy(tmp_path / "t.csv", [(0, 0, 0), (1, 1, 0), (2, 2, 1)])
        track = load_track(path)
        assert len(track) == 3
        assert np.allclose(track.positions, [[0, 0], [1, 0], [2, 1]])

    def test_duplicate_timestamp_rejected(self, tmp_path):
        path = write_xy(tmp_path / "t.csv", [(0, 0, 0), (1, 1, 0), (1, 2, 0)])
        with pytest.raises(TrackValidationError):
            load_track(path)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("t_s,x_m,y_m\n0,0,0\n1,not_a_number,0\n2,1,1\n")
        with pytest.raises(ParseError) as err:
            load_track(path)
        assert err.value.line == 3

    def test_wrong_column_count_names_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("t_s,x_m,y_m\n0,0,0\n1,1\n")
        with pytest.raises(ParseError) as err:
            load_track(path)
        assert err.value.line == 3

    def test_unknown_header_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,c\n0,0,0\n1,1,1\n2,2,2\n")
        with pytest.raises(ParseError):
            load_track(path)

    def test_too_short_rejected(self, tmp_path):
        path = write_xy(tmp_path / "t.csv", [(0, 0, 0), (1, 1, 0)])
        with pytest.raises(TrackValidationError):
            load_track(path)

    def test_latlon_projection_matches_great_circle(self, tmp_path):
        # ~1 km track near Gorongosa-like latitudes
        lat0, lon0 = -18.8, 34.4
        points = [
            (0, lat0, lon0),
            (1, lat0 + 0.004, lon0 + 0.002),
            (2, lat0 + 0.008, lon0 + 0.006),
            (3, lat0 + 0.003, lon0 + 0.009),
        ]
        path = tmp_path / "t.csv"
        path.write_text(
            "t_s,lat_deg,lon_deg\n" + "\n".join(f"{t},{la},{lo}" for t, la, lo in points)
        )
        track = load_track(path)

        def haversine(a, b):
            r = 6371000.0
            la1, lo1, la2, lo2 = map(math.radians, (a[1], a[2], b[1], b[2]))
            s = (
                math.sin((la2 - la1) / 2) ** 2
                + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
            )
            return 2 * r * math.asin(math.sqrt(s))

        for i in range(len(points)):
            for j in range(i + 1, len(points)):
                projected = float(
                    np.hypot(*(track.positions[i] - track.positions[j]))
                )
                assert projected == pytest.approx(
                    haversine(points[i], points[j]), abs=0.1
                )


class TestExtractIncrements:
    def test_straight_track(self):
        positions = [(0, 0), (2, 0), (4, 0), (6, 0), (8, 0)]
        speeds, turns = extract_increments(track_from_positions(positions))
        assert np.allclose(speeds, 2.0)
        assert np.allclose(turns, 0.0)

    def test_right_angle_turn(self):
        positions = [(0, 0), (1, 0), (1, 1)]
        speeds, turns = extract_increments(track_from_positions(positions))
        assert np.allclose(speeds, 1.0)
        assert turns[0] == pytest.approx(math.pi / 2)

    def test_round_trip_through_simulation(self, model):
        # the model's own increments come back out of the positions
        n = 200
        seed = 4242
        positions = trajectory_positions(model, n, seed)
        speeds, turns = extract_increments(track_from_positions(positions))
        bank = make_noise_bank(model, n, 1, seed=seed)
        true_v = bank.speeds[:, 0]
        true_phi = bank.turns[:, 0]
        assert np.allclose(speeds, true_v, atol=1e-9)
        # the first turn is unobservable without the initial heading
        recovered = wrap_angle(turns)
        expected = wrap_angle(true_phi[1:])
        diff = np.angle(np.exp(1j * (recovered - expected)))
        assert np.max(np.abs(diff)) < 1e-9

    def test_zero_displacement_carries_heading(self):
        positions = [(0, 0), (1, 0), (1, 0), (2, 0)]
        with pytest.warns(UserWarning, match="zero-length"):
            track = track_from_positions(positions)
        speeds, turns = extract_increments(track)
        assert speeds[1] == 0.0
        assert np.allclose(turns, 0.0)

    def test_irregular_sampling_resampled_with_warning(self):
        timestamps = np.array([0.0, 1.0, 2.0, 4.5, 5.5, 6.5])
        positions = np.column_stack([np.arange(6.0), np.zeros(6)])
        from sppremote.ingestion import _derive_headings

        track = Track(
            timestamps=timestamps,
            positions=positions,
            headings=_derive_headings(positions),
        )
        with pytest.warns(UserWarning, match="modal"):
            speeds, turns = extract_increments(track)
        assert np.allclose(turns, 0.0)


class TestFitModel:
    def test_recovers_generating_parameters(self, model):
        positions = trajectory_positions(model, 10_000, seed=7)
        fit = fit_model(track_from_positions(positions))
        assert fit.speed.shape == pytest.approx(model.speed.shape, rel=0.05)
        assert fit.speed.scale == pytest.approx(model.speed.scale, rel=0.05)
        assert abs(fit.turn.concentration - model.turn.concentration) < 0.03
        loc = math.atan2(math.sin(fit.turn.location), math.cos(fit.turn.location))
        assert abs(loc) < 0.05

    def test_straight_track_clamps_concentration(self, rng):
        # varying speeds keep the Weibull fit alive; constant bearing pushes
        # the turn concentration into the boundary clamp
        steps = rng.uniform(0.5, 3.0, 60)
        positions = np.column_stack([np.concatenate([[0], np.cumsum(steps)]), np.zeros(61)])
        with pytest.warns(UserWarning, match="clamped"):
            fit = fit_model(track_from_positions(positions))
        assert fit.turn.concentration == pytest.approx(1 - 1e-6)

    def test_rigid_motion_invariance(self, model):
        positions = trajectory_positions(model, 2000, seed=8)
        base = fit_model(track_from_positions(positions))
        angle = 1.1
        rot = np.array(
            [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
        )
        moved = positions @ rot.T + np.array([100.0, -250.0])
        fit = fit_model(track_from_positions(moved))
        assert fit.speed.shape == pytest.approx(base.speed.shape, rel=1e-9)
        assert fit.speed.scale == pytest.approx(base.speed.scale, rel=1e-9)
        assert fit.turn.concentration == pytest.approx(
            base.turn.concentration, abs=1e-9
        )
        shift = (fit.turn.location - base.turn.location) % TWO_PI
        assert min(shift, TWO_PI - shift) < 1e-9

    def test_too_few_increments_rejected(self):
        positions = [(i, 0) for i in range(10)]
        with pytest.raises(TrackValidationError):
            fit_model(track_from_positions(positions))


class TestTrackToTrajectory:
    def test_headings_follow_bearings(self):
        positions = [(0, 0), (1, 0), (1, 1), (0, 1)]
        states = track_to_trajectory(track_from_positions(positions))
        assert len(states) == 4
        assert states[0].theta == pytest.approx(0.0)  # first displacement bearing
        assert states[1].theta == pytest.approx(0.0)
        assert states[2].theta == pytest.approx(math.pi / 2)
        assert states[3].theta == pytest.approx(math.pi)

    def test_simulated_track_round_trips_states(self, model):
        traj = simulate(model, ORIGIN, 50, seed=3)
        positions = np.array([[x.p1, x.p2] for x in traj])
        states = track_to_trajectory(track_from_positions(positions))
        # headings match except the initial one, which is back-filled
        for got, want in zip(states[1:], traj[1:]):
            assert got.p1 == pytest.approx(want.p1, abs=1e-9)
            assert got.p2 == pytest.approx(want.p2, abs=1e-9)
            angle_diff = math.atan2(
                math.sin(got.theta - want.theta), math.cos(got.theta - want.theta)
            )
            assert abs(angle_diff) < 1e-9
