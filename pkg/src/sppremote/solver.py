"""Two-player optimal stopping solver over a fixed noise bank.

The sub-problem anchored at a fresh transmission is solved in the anchor's
relative frame.  All expectations are taken over fixed per-stage noise draws
(common random numbers), and cost-to-go functions are tabulated on a
position box with a periodic heading axis and interpolated trilinearly.
Together the bank, the grid, and the interpolation weights define one finite
stopping model, solved exactly:

* backward sweep: tabulate the stage value ``min(d^2 + continuation, c')``
  (the best-response threshold policy falls out of the same comparison), and
* forward sweep: push the node-weighted conditional measure through the same
  transition taps, mask it with the threshold policy, and read off the
  best-response estimates as weighted position/circular-heading means.

Both sweeps are exact best responses within the same finite model, so the
alternation's objective sequence is non-increasing up to float roundoff,
which the solver asserts and the tests verify.

The transition for one stage collapses into a small set of shift-and-blend
taps (displacements depend on the heading cell and the draw, not on
position), so a full stage sweep is a sparse stencil application.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .belief import ParticleCloud, mean_state, policy_update, process_update
from .dynamics import NoiseBank, SppModel, derive_seed, make_noise_bank
from .errors import DegeneracyError
from .geometry import ORIGIN, TWO_PI, State, distance, distance_squared_many

__all__ = [
    "GridGeometry",
    "SolverConfig",
    "ValueGrid",
    "StageSolution",
    "SubproblemSolution",
    "ChainSolution",
    "NondegeneracyReport",
    "grid_geometry",
    "continuation_value",
    "build_value_grid",
    "no_transmit_test",
    "best_response_estimates",
    "evaluate_G",
    "solve_subproblem",
    "solve_chain",
    "strict_nondegeneracy_report",
]


# ---------------------------------------------------------------------------
# grid geometry


@dataclass(frozen=True)
class GridGeometry:
    """Uniform position box with a periodic heading axis.

    Positions span ``[p1_lo, p1_hi] x [p2_lo, p2_hi]`` with ``n1 x n2``
    nodes; headings take ``ntheta`` equispaced nodes on [0, 2*pi).
    """

    p1_lo: float
    p1_hi: float
    p2_lo: float
    p2_hi: float
    n1: int
    n2: int
    ntheta: int

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("need at least two nodes per position axis")
        if self.ntheta < 4:
            raise ValueError("need at least four heading nodes")
        if not (self.p1_lo < self.p1_hi and self.p2_lo < self.p2_hi):
            raise ValueError("degenerate position box")

    @property
    def h1(self) -> float:
        return (self.p1_hi - self.p1_lo) / (self.n1 - 1)

    @property
    def h2(self) -> float:
        return (self.p2_hi - self.p2_lo) / (self.n2 - 1)

    @property
    def htheta(self) -> float:
        return TWO_PI / self.ntheta

    @property
    def n_nodes(self) -> int:
        return self.n1 * self.n2 * self.ntheta

    def p1_axis(self) -> np.ndarray:
        return np.linspace(self.p1_lo, self.p1_hi, self.n1)

    def p2_axis(self) -> np.ndarray:
        return np.linspace(self.p2_lo, self.p2_hi, self.n2)

    def theta_axis(self) -> np.ndarray:
        return np.arange(self.ntheta) * self.htheta

    def node_states(self) -> np.ndarray:
        """All nodes as an (n_nodes, 3) array in internal (theta, p1, p2) order."""
        th, p1, p2 = np.meshgrid(
            self.theta_axis(), self.p1_axis(), self.p2_axis(), indexing="ij"
        )
        return np.column_stack([p1.ravel(), p2.ravel(), th.ravel()])

    def origin_flat_index(self) -> int:
        """Flat index of the node at the origin state; requires odd n1, n2."""
        if self.n1 % 2 == 0 or self.n2 % 2 == 0:
            raise ValueError("origin node requires odd node counts")
        if abs(self.p1_lo + self.p1_hi) > 1e-9 or abs(self.p2_lo + self.p2_hi) > 1e-9:
            raise ValueError("origin node requires a symmetric box")
        i1 = (self.n1 - 1) // 2
        i2 = (self.n2 - 1) // 2
        return (0 * self.n1 + i1) * self.n2 + i2


# ---------------------------------------------------------------------------
# solver configuration


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the sub-problem solver.

    ``eta`` is the absolute stopping threshold on successive objective
    values; ``None`` selects 1e-4 times the sub-problem's first stopping
    cost.  ``box_radius`` overrides the automatic position box (square root
    of the largest stopping cost plus three RMS single-step displacements).
    """

    n1: int = 41
    n2: int = 41
    ntheta: int = 16
    particles: int = 4096
    bank_size: int = 512
    eta: float | None = None
    max_iters: int = 100
    seed: int = 0
    eps_deg: float = 1e-6
    eps_strict: float = 1e-2
    box_radius: float | None = None

    def __post_init__(self):
        if self.n1 % 2 == 0 or self.n2 % 2 == 0:
            raise ValueError("position node counts must be odd (origin on-grid)")
        if self.ntheta < 4:
            raise ValueError("need at least four heading nodes")
        if self.particles < 1 or self.bank_size < 1:
            raise ValueError("particles and bank_size must be positive")
        if self.eta is not None and self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.eps_deg <= 0:
            raise ValueError("eps_deg must be positive")


def grid_geometry(config: SolverConfig, model: SppModel, c_primes) -> GridGeometry:
    """Position box sized so no-transmit regions stay interior.

    Threshold regions are contained in balls of squared radius c' around the
    estimates; the margin absorbs one-step spreading at the edges.
    """
    r = config.box_radius
    if r is None:
        r = math.sqrt(float(np.max(c_primes))) + 3.0 * model.rms_speed()
    return GridGeometry(-r, r, -r, r, config.n1, config.n2, config.ntheta)


# ---------------------------------------------------------------------------
# stage transition taps (collapsed kernel) and numba sweeps


@dataclass(frozen=True)
class StageTaps:
    """One stage transition collapsed into shift-and-blend taps.

    For heading cell ``ith``, taps in ``start[ith]:start[ith+1]`` carry
    (target heading cell, padded row/column shifts, weight); weights per
    heading cell sum to one.  Applying the taps to a padded value table is
    the bank-averaged interpolation sweep; the transposed application pushes
    a node measure forward.
    """

    jth: np.ndarray
    s1: np.ndarray  # row shift, pad already added
    s2: np.ndarray
    w: np.ndarray
    start: np.ndarray
    pad1: int
    pad2: int


def build_stage_taps(geom: GridGeometry, bank: NoiseBank, slot: int) -> StageTaps:
    """Collapse the draws of one bank slot into per-heading-cell taps."""
    nth = geom.ntheta
    v = bank.speeds[slot]
    phi = bank.turns[slot]
    m = v.shape[0]

    all_keys = []
    all_w = []
    for ith in range(nth):
        heading = ith * geom.htheta + phi
        d1 = v * np.cos(heading) / geom.h1
        d2 = v * np.sin(heading) / geom.h2
        s1 = np.floor(d1)
        f1 = d1 - s1
        s2 = np.floor(d2)
        f2 = d2 - s2
        ath = np.mod(heading, TWO_PI) / geom.htheta
        cth = np.minimum(ath.astype(np.int64), nth - 1)
        fth = np.clip(ath - cth, 0.0, 1.0)

        jth = np.empty((m, 8), dtype=np.int64)
        sh1 = np.empty((m, 8), dtype=np.int64)
        sh2 = np.empty((m, 8), dtype=np.int64)
        wt = np.empty((m, 8))
        idx = 0
        for jth_cell, wth in ((cth, 1.0 - fth), ((cth + 1) % nth, fth)):
            for a, w1 in ((0, 1.0 - f1), (1, f1)):
                for b, w2 in ((0, 1.0 - f2), (1, f2)):
                    jth[:, idx] = jth_cell
                    sh1[:, idx] = s1.astype(np.int64) + a
                    sh2[:, idx] = s2.astype(np.int64) + b
                    wt[:, idx] = wth * w1 * w2 / m
                    idx += 1
        key = ((np.int64(ith) * nth + jth.ravel()) << 32) + (
            (sh1.ravel() + (1 << 15)) << 16
        ) + (sh2.ravel() + (1 << 15))
        all_keys.append(key)
        all_w.append(wt.ravel())

    keys = np.concatenate(all_keys)
    weights = np.concatenate(all_w)
    uniq, inverse = np.unique(keys, return_inverse=True)
    acc = np.zeros(uniq.shape[0])
    np.add.at(acc, inverse, weights)

    s2o = (uniq & 0xFFFF) - (1 << 15)
    s1o = ((uniq >> 16) & 0xFFFF) - (1 << 15)
    pair = uniq >> 32
    jth_arr = (pair % nth).astype(np.int64)
    ith_arr = (pair // nth).astype(np.int64)

    pad1 = int(max(np.max(s1o), -np.min(s1o), 1))
    pad2 = int(max(np.max(s2o), -np.min(s2o), 1))
    start = np.zeros(nth + 1, dtype=np.int64)
    np.add.at(start, ith_arr + 1, 1)
    start = np.cumsum(start)
    return StageTaps(
        jth=jth_arr,
        s1=(s1o + pad1).astype(np.int64),
        s2=(s2o + pad2).astype(np.int64),
        w=acc,
        start=start,
        pad1=pad1,
        pad2=pad2,
    )


@njit(cache=True)
def _tap_gather(vpad, jth, s1, s2, w, start, n1, n2, out):
    """out[ith, i, j] = sum of taps w * vpad[jth, i + s1, j + s2]."""
    nth = out.shape[0]
    for ith in range(nth):
        block = out[ith]
        for t in range(start[ith], start[ith + 1]):
            src = vpad[jth[t]]
            wt = w[t]
            a = s1[t]
            b = s2[t]
            for i in range(n1):
                row = src[i + a]
                orow = block[i]
                for j in range(n2):
                    orow[j] += wt * row[j + b]


@njit(cache=True)
def _tap_scatter(nu, jth, s1, s2, w, start, acc):
    """Adjoint of ``_tap_gather``: push node mass through the taps."""
    nth, n1, n2 = nu.shape
    for ith in range(nth):
        src = nu[ith]
        for t in range(start[ith], start[ith + 1]):
            dst = acc[jth[t]]
            wt = w[t]
            a = s1[t]
            b = s2[t]
            for i in range(n1):
                drow = dst[i + a]
                srow = src[i]
                for j in range(n2):
                    drow[j + b] += wt * srow[j]


@njit(cache=True)
def _query_gather(queries, v, phi, values, p1_lo, p2_lo, h1, h2, out):
    """Bank-averaged trilinear interpolation at the successors of each query.

    ``values`` has internal (ntheta, n1, n2) layout; positions clamp to the
    box, the heading axis wraps.
    """
    nth, n1, n2 = values.shape
    hth = TWO_PI / nth
    n_draws = v.shape[0]
    for q in range(queries.shape[0]):
        p1 = queries[q, 0]
        p2 = queries[q, 1]
        th = queries[q, 2]
        acc = 0.0
        for m in range(n_draws):
            heading = th + phi[m]
            y1 = p1 + v[m] * np.cos(heading)
            y2 = p2 + v[m] * np.sin(heading)

            a1 = (y1 - p1_lo) / h1
            if a1 < 0.0:
                a1 = 0.0
            elif a1 > n1 - 1.0:
                a1 = n1 - 1.0
            c1 = int(a1)
            if c1 > n1 - 2:
                c1 = n1 - 2
            f1 = a1 - c1

            a2 = (y2 - p2_lo) / h2
            if a2 < 0.0:
                a2 = 0.0
            elif a2 > n2 - 1.0:
                a2 = n2 - 1.0
            c2 = int(a2)
            if c2 > n2 - 2:
                c2 = n2 - 2
            f2 = a2 - c2

            ath = heading % TWO_PI
            if ath < 0.0:
                ath += TWO_PI
            ath = ath / hth
            ct = int(ath)
            if ct > nth - 1:
                ct = nth - 1
            ft = ath - ct
            if ft < 0.0:
                ft = 0.0
            elif ft > 1.0:
                ft = 1.0
            ctp = ct + 1
            if ctp == nth:
                ctp = 0

            v00 = values[ct, c1, c2] * (1 - ft) + values[ctp, c1, c2] * ft
            v01 = values[ct, c1, c2 + 1] * (1 - ft) + values[ctp, c1, c2 + 1] * ft
            v10 = values[ct, c1 + 1, c2] * (1 - ft) + values[ctp, c1 + 1, c2] * ft
            v11 = values[ct, c1 + 1, c2 + 1] * (1 - ft) + values[ctp, c1 + 1, c2 + 1] * ft
            acc += (v00 * (1 - f2) + v01 * f2) * (1 - f1) + (v10 * (1 - f2) + v11 * f2) * f1
        out[q] = acc / n_draws


# ---------------------------------------------------------------------------
# value grids


@dataclass(frozen=True)
class ValueGrid:
    """Stage value function tabulated at grid nodes.

    ``values_internal`` holds min(d^2 + continuation, c') in (theta, p1, p2)
    layout; every entry lies in [0, c'].  ``cont_internal`` retains the
    continuation term at the nodes while a solve is in flight (the forward
    sweep reuses it); it is dropped from returned solutions.
    """

    geometry: GridGeometry
    values_internal: np.ndarray
    stage: int
    stopping_cost: float
    cont_internal: np.ndarray | None = None

    def __post_init__(self):
        expected = (self.geometry.ntheta, self.geometry.n1, self.geometry.n2)
        if self.values_internal.shape != expected:
            raise ValueError(f"values shape {self.values_internal.shape} != {expected}")
        self.values_internal.setflags(write=False)

    @property
    def values(self) -> np.ndarray:
        """Node values in (n1, n2, ntheta) order."""
        return np.ascontiguousarray(np.transpose(self.values_internal, (1, 2, 0)))

    def interpolate(self, points: np.ndarray) -> np.ndarray:
        """Plain trilinear interpolation (clamped box, periodic heading).

        Vectorized numpy path, independent of the solver kernels; used as a
        cross-check in tests.
        """
        g = self.geometry
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a1 = np.clip((pts[:, 0] - g.p1_lo) / g.h1, 0.0, g.n1 - 1.0)
        c1 = np.minimum(a1.astype(np.int64), g.n1 - 2)
        f1 = a1 - c1
        a2 = np.clip((pts[:, 1] - g.p2_lo) / g.h2, 0.0, g.n2 - 1.0)
        c2 = np.minimum(a2.astype(np.int64), g.n2 - 2)
        f2 = a2 - c2
        ath = np.mod(pts[:, 2], TWO_PI) / g.htheta
        ct = np.minimum(ath.astype(np.int64), g.ntheta - 1)
        ft = np.clip(ath - ct, 0.0, 1.0)
        ctp = (ct + 1) % g.ntheta

        vals = self.values_internal
        out = np.zeros(pts.shape[0])
        for jth, wth in ((ct, 1.0 - ft), (ctp, ft)):
            for a, w1 in ((0, 1.0 - f1), (1, f1)):
                for b, w2 in ((0, 1.0 - f2), (1, f2)):
                    out += wth * w1 * w2 * vals[jth, c1 + a, c2 + b]
        return out


def _pad_replicate(values: np.ndarray, pad1: int, pad2: int) -> np.ndarray:
    return np.pad(values, ((0, 0), (pad1, pad1), (pad2, pad2)), mode="edge")


def _fold_pad(acc: np.ndarray, pad1: int, pad2: int) -> np.ndarray:
    """Adjoint of edge replication: collapse pad mass onto boundary nodes."""
    n1p = acc.shape[1]
    n2p = acc.shape[2]
    if pad1:
        acc[:, pad1, :] += np.sum(acc[:, :pad1, :], axis=1)
        acc[:, n1p - pad1 - 1, :] += np.sum(acc[:, n1p - pad1 :, :], axis=1)
        acc = acc[:, pad1 : n1p - pad1, :]
    if pad2:
        acc[:, :, pad2] += np.sum(acc[:, :, :pad2], axis=2)
        acc[:, :, n2p - pad2 - 1] += np.sum(acc[:, :, n2p - pad2 :], axis=2)
        acc = acc[:, :, pad2 : n2p - pad2]
    return np.ascontiguousarray(acc)


def _cont_table(next_grid: ValueGrid | None, taps: StageTaps | None, geom: GridGeometry) -> np.ndarray:
    """Continuation term at every node (zero at the terminal stage)."""
    if next_grid is None:
        return np.zeros((geom.ntheta, geom.n1, geom.n2))
    vpad = _pad_replicate(next_grid.values_internal, taps.pad1, taps.pad2)
    out = np.zeros((geom.ntheta, geom.n1, geom.n2))
    _tap_gather(vpad, taps.jth, taps.s1, taps.s2, taps.w, taps.start, geom.n1, geom.n2, out)
    return out


def _push_measure(nu: np.ndarray, taps: StageTaps) -> np.ndarray:
    nth, n1, n2 = nu.shape
    acc = np.zeros((nth, n1 + 2 * taps.pad1, n2 + 2 * taps.pad2))
    _tap_scatter(nu, taps.jth, taps.s1, taps.s2, taps.w, taps.start, acc)
    return _fold_pad(acc, taps.pad1, taps.pad2)


def continuation_value(grid: ValueGrid | None, x, bank: NoiseBank, stage: int):
    """Bank-averaged next-stage value from state(s) ``x`` at ``stage``.

    Uses the transition draws into stage+1 (the grid's stage); a missing
    grid means the terminal stage, where the continuation is zero.  Accepts
    one State or an (n, 3) array.
    """
    single = isinstance(x, State)
    queries = x.as_array()[None, :] if single else np.ascontiguousarray(x, dtype=float)
    if grid is None:
        out = np.zeros(queries.shape[0])
        return 0.0 if single else out
    if grid.stage != stage + 1:
        raise ValueError(f"grid tabulates stage {grid.stage}, caller is at stage {stage}")
    slot = stage + 1
    g = grid.geometry
    out = np.empty(queries.shape[0])
    _query_gather(
        queries,
        bank.speeds[slot],
        bank.turns[slot],
        grid.values_internal,
        g.p1_lo,
        g.p2_lo,
        g.h1,
        g.h2,
        out,
    )
    return float(out[0]) if single else out


def build_value_grid(
    stage: int,
    estimate: State,
    next_grid: ValueGrid | None,
    c_prime: float,
    bank: NoiseBank,
    geometry: GridGeometry,
    taps: StageTaps | None = None,
) -> ValueGrid:
    """Tabulate min(d^2(node, estimate) + continuation(node), c_prime).

    ``taps`` may carry the precomputed transition of the slot into
    stage+1; otherwise it is built on the fly from the bank.
    """
    if c_prime < 0:
        raise ValueError("stopping cost must be nonnegative")
    if next_grid is not None:
        if taps is None:
            taps = build_stage_taps(geometry, bank, stage + 1)
        cont = _cont_table(next_grid, taps, geometry)
    else:
        cont = _cont_table(None, None, geometry)
    d2 = distance_squared_many(geometry.node_states(), estimate).reshape(
        geometry.ntheta, geometry.n1, geometry.n2
    )
    values = np.minimum(d2 + cont, c_prime)
    return ValueGrid(
        geometry=geometry,
        values_internal=values,
        stage=stage,
        stopping_cost=float(c_prime),
        cont_internal=cont,
    )


# ---------------------------------------------------------------------------
# stage/sub-problem solutions


@dataclass(frozen=True)
class StageSolution:
    """Relative-frame decision data for one stage.

    Not transmitting is optimal exactly when
    ``d^2(x, estimate) + continuation(x) <= stopping_cost``, with the
    continuation read from ``continuation`` (the next stage's value grid)
    through the owning bank; it is zero at the final stage.
    """

    estimate: State
    continuation: ValueGrid | None
    stopping_cost: float
    bank: NoiseBank
    stage: int

    def continuation_at(self, x):
        return continuation_value(self.continuation, x, self.bank, self.stage)


def no_transmit_test(stage: StageSolution):
    """Predicate over states: True where staying silent is (weakly) optimal.

    The boundary is included, matching the closed threshold set.
    """

    def test(states):
        single = isinstance(states, State)
        arr = states.as_array()[None, :] if single else np.asarray(states, dtype=float)
        d2 = distance_squared_many(arr, stage.estimate)
        cont = continuation_value(stage.continuation, arr, stage.bank, stage.stage)
        mask = d2 + cont <= stage.stopping_cost
        return bool(mask[0]) if single else mask

    return test


@dataclass(frozen=True)
class SubproblemSolution:
    """Converged policy/estimate pair for one sub-problem.

    ``stages[r]`` covers absolute stage k + r; ``achieved_cost`` is the
    objective at the returned estimates; ``g_history`` holds the objective
    after every backward sweep; ``survivals[i][r]`` is the per-stage
    no-transmission mass seen by forward sweep i.
    """

    k: int
    stages: list[StageSolution]
    achieved_cost: float
    iterations: int
    converged: bool
    g_history: list[float] = field(default_factory=list)
    survivals: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        if self.achieved_cost < 0:
            raise ValueError("achieved cost must be nonnegative")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")


@dataclass(frozen=True)
class ChainSolution:
    """All sub-problem solutions plus the stopping-cost table."""

    subproblems: list[SubproblemSolution]  # index k-1 for sub-problem k
    c_prime: np.ndarray
    costs: np.ndarray
    model: SppModel
    config: SolverConfig


# ---------------------------------------------------------------------------
# best responses


def best_response_estimates(policies, bank: NoiseBank, config: SolverConfig, fallbacks=None):
    """Forward particle pass from the anchor under fixed policies.

    Starting from a point mass at the origin state, alternate the process
    and policy updates of the particle cloud and record the optimal
    estimate (position mean, circular heading mean) of each post-policy
    cloud together with its survival mass.
    """
    n_stages = len(policies)
    if bank.stages < n_stages:
        raise ValueError(f"bank covers {bank.stages} stages, need {n_stages}")
    if fallbacks is None:
        fallbacks = [0.0] * n_stages
    cloud = ParticleCloud.point_mass(ORIGIN, config.particles)
    estimates: list[State] = []
    clouds: list[ParticleCloud] = []
    survivals: list[float] = []
    for r in range(n_stages):
        cloud = process_update(cloud, bank, r)
        cloud, survival = policy_update(
            cloud, policies[r], stage=r, eps_deg=config.eps_deg
        )
        estimates.append(mean_state(cloud, fallbacks[r]))
        clouds.append(cloud)
        survivals.append(survival)
    return estimates, clouds, survivals


def _backward_sweep(estimates, c_primes, bank, geometry, taps_list):
    """Value grids for all stages plus the objective at the anchor."""
    n_stages = len(estimates)
    grids: list[ValueGrid | None] = [None] * n_stages
    nxt = None
    for r in range(n_stages - 1, -1, -1):
        taps = taps_list[r + 1] if r + 1 < n_stages else None
        grids[r] = build_value_grid(r, estimates[r], nxt, c_primes[r], bank, geometry, taps)
        nxt = grids[r]
    g_value = continuation_value(grids[0], ORIGIN, bank, stage=-1)
    return grids, g_value


def _forward_sweep(grids, old_estimates, c_primes, taps_list, geometry, k, eps_deg):
    """Best-response estimates from the node measure induced by the grids.

    The conditional node measure is pushed through the same taps that built
    the grids and masked with the same node threshold comparison, so the
    estimates are exact best responses within the finite model.
    """
    n_stages = len(grids)
    node_states = geometry.node_states()
    nu = np.zeros((geometry.ntheta, geometry.n1, geometry.n2))
    nu.ravel()[geometry.origin_flat_index()] = 1.0
    nu = _push_measure(nu, taps_list[0])

    estimates: list[State] = []
    survivals: list[float] = []
    for r in range(n_stages):
        d2 = distance_squared_many(node_states, old_estimates[r])
        mask = d2 + grids[r].cont_internal.ravel() <= c_primes[r]
        weights = nu.ravel() * mask
        survival = float(np.sum(weights))
        if survival < eps_deg:
            raise DegeneracyError(k + r, survival)
        weights = weights / survival
        cloud = ParticleCloud(node_states, weights)
        estimates.append(mean_state(cloud, fallback_heading=old_estimates[r].theta))
        survivals.append(survival)
        if r + 1 < n_stages:
            nu = _push_measure(weights.reshape(nu.shape), taps_list[r + 1])
    return estimates, survivals


def evaluate_G(estimates, c_primes, bank: NoiseBank, geometry: GridGeometry) -> float:
    """Objective of the best-response policy to ``estimates`` at the anchor.

    Builds the value grids backward and returns the bank-averaged first
    stage value from the origin.  Deterministic in (estimates, bank,
    geometry).
    """
    if len(estimates) != len(c_primes):
        raise ValueError("one stopping cost per stage required")
    taps_list = [None] + [
        build_stage_taps(geometry, bank, slot) for slot in range(1, len(estimates))
    ]
    _, g_value = _backward_sweep(estimates, c_primes, bank, geometry, taps_list)
    return g_value


# ---------------------------------------------------------------------------
# the alternation


def _always_silent(states):
    return np.ones(np.asarray(states).shape[0], dtype=bool)


def solve_subproblem(k: int, c_primes, model: SppModel, config: SolverConfig) -> SubproblemSolution:
    """Alternate best responses until the objective stalls.

    Estimates start from the no-transmission conditional means.  Each
    iteration rebuilds the threshold policy (backward sweep) and the
    estimates (forward sweep); the run stops when successive objective
    values differ by at most eta, or at ``max_iters`` with the converged
    flag cleared.
    """
    c_primes = np.asarray(c_primes, dtype=float)
    if np.any(c_primes <= 0):
        raise ValueError("stopping costs must be positive")
    n_stages = c_primes.shape[0]
    eta = config.eta if config.eta is not None else 1e-4 * float(c_primes[0])

    value_bank = make_noise_bank(
        model, n_stages, config.bank_size, derive_seed(config.seed, k, 1)
    )
    particle_bank = make_noise_bank(
        model, n_stages, config.particles, derive_seed(config.seed, k, 2)
    )
    geometry = grid_geometry(config, model, c_primes)
    taps_list = [build_stage_taps(geometry, value_bank, slot) for slot in range(n_stages)]

    estimates, _, _ = best_response_estimates(
        [_always_silent] * n_stages, particle_bank, config
    )

    grids, g_value = _backward_sweep(estimates, c_primes, value_bank, geometry, taps_list)
    g_history = [g_value]
    survival_history: list[list[float]] = []
    max_step = value_bank.max_displacement()

    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        estimates, survivals = _forward_sweep(
            grids, estimates, c_primes, taps_list, geometry, k, config.eps_deg
        )
        survival_history.append(survivals)
        _check_estimate_bounds(estimates, c_primes, max_step)
        grids, g_value = _backward_sweep(estimates, c_primes, value_bank, geometry, taps_list)
        g_history.append(g_value)
        if abs(g_history[-1] - g_history[-2]) <= eta:
            converged = True
            break

    stages = [
        StageSolution(
            estimate=estimates[r],
            continuation=_strip_cont(grids[r + 1]) if r + 1 < n_stages else None,
            stopping_cost=float(c_primes[r]),
            bank=value_bank,
            stage=r,
        )
        for r in range(n_stages)
    ]
    return SubproblemSolution(
        k=k,
        stages=stages,
        achieved_cost=g_history[-1],
        iterations=iterations,
        converged=converged,
        g_history=g_history,
        survivals=survival_history,
    )


def _strip_cont(grid: ValueGrid) -> ValueGrid:
    # continuation tables are a solve-time cache; solutions keep values only
    return replace(grid, cont_internal=None)


def _check_estimate_bounds(estimates, c_primes, max_step):
    """Iterates must stay within reach of the anchor (compactness argument)."""
    for r, est in enumerate(estimates):
        bound = math.sqrt(float(c_primes[r])) + max_step * (r + 1) + 1e-9
        dist = distance(ORIGIN, est)
        if dist > bound:
            raise AssertionError(
                f"estimate at relative stage {r} escaped its bound: {dist:.3f} > {bound:.3f}"
            )


def solve_chain(n_stages: int, costs, model: SppModel, config: SolverConfig) -> ChainSolution:
    """Solve every sub-problem backward in time and thread the stopping costs.

    The last stopping cost equals the raw transmission cost; each earlier
    one adds the achieved objective of the following sub-problem, which
    prices a transmission at the cost of restarting from a fresh anchor.
    """
    costs = np.broadcast_to(np.asarray(costs, dtype=float), (n_stages,)).copy()
    if np.any(costs <= 0):
        raise ValueError("transmission costs must be positive")
    c_prime = np.empty(n_stages)
    c_prime[n_stages - 1] = costs[n_stages - 1]
    subproblems: list[SubproblemSolution | None] = [None] * n_stages
    for k in range(n_stages, 0, -1):
        solution = solve_subproblem(k, c_prime[k - 1 :], model, config)
        subproblems[k - 1] = solution
        if k >= 2:
            c_prime[k - 2] = costs[k - 2] + solution.achieved_cost
    return ChainSolution(
        subproblems=subproblems,
        c_prime=c_prime,
        costs=costs,
        model=model,
        config=config,
    )


@dataclass(frozen=True)
class NondegeneracyReport:
    """Minimum observed per-stage survival across a chain's solves."""

    per_subproblem: dict[int, float]
    min_survival: float
    threshold: float

    @property
    def warned(self) -> bool:
        return self.min_survival < self.threshold


def strict_nondegeneracy_report(chain: ChainSolution) -> NondegeneracyReport:
    """Scan recorded survivals; warn when any falls below the strict floor."""
    per_sub: dict[int, float] = {}
    overall = 1.0
    for sol in chain.subproblems:
        lowest = 1.0
        for per_iter in sol.survivals:
            if per_iter:
                lowest = min(lowest, min(per_iter))
        per_sub[sol.k] = lowest
        overall = min(overall, lowest)
    threshold = chain.config.eps_strict
    if overall < threshold:
        warnings.warn(
            f"minimum survival {overall:.3e} below the strict floor {threshold:.1e}",
            stacklevel=2,
        )
    return NondegeneracyReport(per_subproblem=per_sub, min_survival=overall, threshold=threshold)
