"""GPS track ingestion and motion-model fitting.

Reads delimiter-separated tracks (either planar meters or lat/lon degrees),
extracts per-step speeds and turning angles by inverting the motion model on
consecutive displacements, and fits the Weibull/wrapped-Cauchy noise
parameters by maximum likelihood.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import SppModel
from .errors import ParseError, TrackValidationError
from .geometry import State, wrap_angle
from .noise import wc_mle, weibull_mle

EARTH_RADIUS_M = 6371000.0
_XY_HEADERS = ("t_s", "x_m", "y_m")
_LATLON_HEADERS = ("t_s", "lat_deg", "lon_deg")
# gaps further than 50% from the modal interval count as irregular
_GAP_DEVIATION = 0.5
_IRREGULAR_FRACTION = 0.1


@dataclass(frozen=True)
class Track:
    """Timestamped planar positions with displacement-derived headings.

    ``headings[i]`` is the bearing of the displacement from point i to
    point i+1; zero-length displacements carry the previous heading.
    """

    timestamps: np.ndarray
    positions: np.ndarray
    headings: np.ndarray

    def __post_init__(self):
        if self.timestamps.ndim != 1 or self.timestamps.size < 3:
            raise TrackValidationError("need at least 3 track points")
        if np.any(np.diff(self.timestamps) <= 0):
            raise TrackValidationError("timestamps must be strictly increasing")
        if self.positions.shape != (self.timestamps.size, 2):
            raise TrackValidationError("positions must be (n, 2)")

    def __len__(self) -> int:
        return self.timestamps.size


def _derive_headings(positions: np.ndarray) -> np.ndarray:
    disp = np.diff(positions, axis=0)
    lengths = np.hypot(disp[:, 0], disp[:, 1])
    headings = wrap_angle(np.arctan2(disp[:, 1], disp[:, 0]))
    stalled = lengths == 0.0
    if np.any(stalled):
        warnings.warn(
            f"{int(np.sum(stalled))} zero-length displacements; carrying previous heading",
            stacklevel=3,
        )
        for i in np.flatnonzero(stalled):
            headings[i] = headings[i - 1] if i > 0 else 0.0
    return headings


def _project_latlon(lat_deg: np.ndarray, lon_deg: np.ndarray) -> np.ndarray:
    """Local equirectangular projection about the track centroid, in meters."""
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    lat0 = float(np.mean(lat))
    lon0 = float(np.mean(lon))
    x = EARTH_RADIUS_M * (lon - lon0) * math.cos(lat0)
    y = EARTH_RADIUS_M * (lat - lat0)
    return np.column_stack([x, y])


def load_track(path, fmt: str = "auto") -> Track:
    """Read a comma-separated track file with a header row.

    Columns are either (t_s, x_m, y_m) or (t_s, lat_deg, lon_deg); with
    ``fmt="auto"`` the header decides.  Lat/lon input is projected to local
    planar meters about the track centroid.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty file") from None
        header = [h.strip().lower() for h in header]
        if fmt == "auto":
            if header == list(_XY_HEADERS):
                fmt = "xy"
            elif header == list(_LATLON_HEADERS):
                fmt = "latlon"
            else:
                raise ParseError(1, f"unrecognized header {header}")
        elif len(header) != 3:
            raise ParseError(1, f"expected 3 columns, got {len(header)}")

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(lineno, f"expected 3 fields, got {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None

    if len(rows) < 3:
        raise TrackValidationError(f"need at least 3 track points, got {len(rows)}")
    data = np.asarray(rows)
    timestamps = data[:, 0]
    if np.any(np.diff(timestamps) <= 0):
        raise TrackValidationError("timestamps must be strictly increasing")
    if fmt == "latlon":
        positions = _project_latlon(data[:, 1], data[:, 2])
    else:
        positions = data[:, 1:3].copy()
    return Track(
        timestamps=timestamps,
        positions=positions,
        headings=_derive_headings(positions),
    )


def _resample_to_modal_interval(track: Track) -> Track:
    """Linear-interpolate onto the most common sampling interval.

    The motion model is a fixed-step recursion; regularly sampled tracks
    pass through untouched.
    """
    gaps = np.diff(track.timestamps)
    rounded = np.round(gaps, 6)
    values, counts = np.unique(rounded, return_counts=True)
    modal = float(values[np.argmax(counts)])
    if np.allclose(gaps, modal, rtol=1e-9, atol=1e-9):
        return track
    irregular = np.mean(np.abs(gaps - modal) > _GAP_DEVIATION * modal)
    if irregular > _IRREGULAR_FRACTION:
        warnings.warn(
            f"{irregular:.0%} of sampling gaps deviate >50% from the modal "
            f"interval {modal:g}s; resampling may distort increments",
            stacklevel=3,
        )
    t0, t1 = track.timestamps[0], track.timestamps[-1]
    n = int(math.floor((t1 - t0) / modal)) + 1
    new_t = t0 + modal * np.arange(n)
    new_pos = np.column_stack(
        [np.interp(new_t, track.timestamps, track.positions[:, i]) for i in (0, 1)]
    )
    return Track(timestamps=new_t, positions=new_pos, headings=_derive_headings(new_pos))


def extract_increments(track: Track) -> tuple[np.ndarray, np.ndarray]:
    """Invert the motion model: per-step speeds and turning angles.

    Speeds are displacement magnitudes; turns are wrapped differences of
    consecutive displacement bearings (the first heading is the first
    displacement's bearing, so one fewer turn than speeds).
    """
    track = _resample_to_modal_interval(track)
    disp = np.diff(track.positions, axis=0)
    speeds = np.hypot(disp[:, 0], disp[:, 1])
    turns = wrap_angle(np.diff(track.headings))
    return speeds, turns


def fit_model(track: Track) -> SppModel:
    """Maximum-likelihood motion model from a track's increments."""
    speeds, turns = extract_increments(track)
    if speeds.size + 1 < 30:
        raise TrackValidationError(
            f"need at least 30 increments to fit, got {speeds.size}"
        )
    positive = speeds[speeds > 0]
    if positive.size < speeds.size:
        warnings.warn(
            f"dropping {speeds.size - positive.size} zero speeds from the Weibull fit",
            stacklevel=2,
        )
    return SppModel(speed=weibull_mle(positive), turn=wc_mle(turns))


def track_to_trajectory(track: Track) -> list[State]:
    """States (position + derived heading) for episode evaluation.

    The first state takes the first displacement's bearing as its heading;
    every later state's heading is the bearing of the displacement that
    produced it.
    """
    track = _resample_to_modal_interval(track)
    states = []
    for i in range(len(track)):
        heading = track.headings[0] if i == 0 else track.headings[i - 1]
        states.append(State(track.positions[i, 0], track.positions[i, 1], heading))
    return states
