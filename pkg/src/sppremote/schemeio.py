"""Run configuration and on-disk formats.

The run configuration is one JSON document (model parameters or a track to
fit, horizon, costs, solver knobs, seed); it is embedded verbatim in every
output so any artifact can be reproduced from itself.

The scheme file is a versioned binary container: magic string, format
version, canonical-JSON configuration, then little-endian float64 payload
(stopping costs, per-stage estimates, value tables).  Noise banks are not
stored; they are regenerated from the seed on load, which the reader
verifies against a stored check value.  Numeric text outputs are
comma-separated with a header row and a leading ``# config:`` comment.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dynamics import SppModel, derive_seed, make_noise_bank
from .errors import ParseError
from .geometry import State
from .noise import WeibullParams, WrappedCauchyParams
from .runtime import SchemeTable
from .solver import GridGeometry, SolverConfig, StageSolution, ValueGrid

MAGIC = b"SPPSCHEME\x00"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# run configuration


def model_to_dict(model: SppModel) -> dict:
    return {
        "speed_shape": model.speed.shape,
        "speed_scale": model.speed.scale,
        "turn_concentration": model.turn.concentration,
        "turn_location": model.turn.location,
    }


def model_from_dict(d: dict) -> SppModel:
    return SppModel(
        speed=WeibullParams(shape=d["speed_shape"], scale=d["speed_scale"]),
        turn=WrappedCauchyParams(
            concentration=d["turn_concentration"], location=d["turn_location"]
        ),
    )


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs, validated before any compute starts.

    Exactly one of ``model``, ``model_file``, ``track`` provides the motion
    model.  ``costs`` is a scalar broadcast over the horizon or a list of
    per-stage transmission costs.
    """

    horizon: int
    costs: float | list
    seed: int = 0
    model: dict | None = None
    model_file: str | None = None
    track: str | None = None
    solver: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        sources = [s for s in (self.model, self.model_file, self.track) if s is not None]
        if len(sources) != 1:
            raise ValueError("exactly one of model/model_file/track must be given")
        costs = self.cost_vector()
        if np.any(costs <= 0):
            raise ValueError("transmission costs must be positive")
        if self.model is not None:
            model_from_dict(self.model)  # validates parameter ranges
        self.solver_config()  # validates solver knobs

    def cost_vector(self) -> np.ndarray:
        return np.broadcast_to(
            np.asarray(self.costs, dtype=float), (self.horizon,)
        ).copy()

    def solver_config(self) -> SolverConfig:
        return SolverConfig(seed=self.seed, **self.solver)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        return RunConfig(**d)

    @staticmethod
    def from_json_file(path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return RunConfig.from_dict(json.load(fh))

    def with_overrides(self, seed=None, out=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if out is not None:
            cfg = replace(cfg, out=str(out))
        return cfg


def canonical_json(obj) -> str:
    """Deterministic JSON used for embedding and byte-exact replays."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# scheme container


def _write_f64(fh, values):
    arr = np.ascontiguousarray(values, dtype="<f8")
    fh.write(arr.tobytes())


def _read_f64(fh, count) -> np.ndarray:
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise ParseError(0, "truncated scheme file")
    return np.frombuffer(raw, dtype="<f8").copy()


def _write_u(fh, fmt, *values):
    fh.write(struct.pack("<" + fmt, *values))


def _read_u(fh, fmt):
    size = struct.calcsize("<" + fmt)
    raw = fh.read(size)
    if len(raw) != size:
        raise ParseError(0, "truncated scheme file")
    return struct.unpack("<" + fmt, raw)


def write_scheme(path, chain, run_config: RunConfig) -> None:
    """Serialize a solved chain; byte-identical for identical config+seed."""
    horizon = len(chain.subproblems)
    buf = io.BytesIO()
    buf.write(MAGIC)
    _write_u(buf, "I", FORMAT_VERSION)
    config_bytes = canonical_json(run_config.to_dict()).encode("utf-8")
    _write_u(buf, "Q", len(config_bytes))
    buf.write(config_bytes)
    _write_u(buf, "I", horizon)
    _write_f64(buf, chain.costs)
    _write_f64(buf, chain.c_prime)
    for sub in chain.subproblems:
        _write_u(buf, "Q", sub.stages[0].bank.seed)
        _write_f64(buf, [sub.achieved_cost])
        _write_u(buf, "IB", sub.iterations, int(sub.converged))
        for stage in sub.stages:
            est = stage.estimate
            _write_f64(buf, [est.p1, est.p2, est.theta, stage.stopping_cost])
            grid = stage.continuation
            _write_u(buf, "B", int(grid is not None))
            if grid is not None:
                g = grid.geometry
                _write_f64(buf, [g.p1_lo, g.p1_hi, g.p2_lo, g.p2_hi])
                _write_u(buf, "IIII", g.n1, g.n2, g.ntheta, grid.stage)
                _write_f64(buf, [grid.stopping_cost])
                _write_f64(buf, grid.values_internal.ravel())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


@dataclass(frozen=True)
class LoadedScheme:
    """A scheme file back in memory, banks regenerated from the seed."""

    run_config: RunConfig
    table: SchemeTable
    costs: np.ndarray
    c_prime: np.ndarray
    model: SppModel
    achieved: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


def read_scheme(path) -> LoadedScheme:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ParseError(0, "not a scheme file (bad magic)")
        (version,) = _read_u(fh, "I")
        if version != FORMAT_VERSION:
            raise ParseError(0, f"unsupported scheme format version {version}")
        (config_len,) = _read_u(fh, "Q")
        run_config = RunConfig.from_dict(json.loads(fh.read(config_len).decode("utf-8")))
        (horizon,) = _read_u(fh, "I")
        costs = _read_f64(fh, horizon)
        c_prime = _read_f64(fh, horizon)
        if run_config.model is None:
            raise ParseError(0, "scheme file config lacks resolved model parameters")
        model = model_from_dict(run_config.model)
        solver_config = run_config.solver_config()

        entries: dict[tuple[int, int], StageSolution] = {}
        achieved = np.empty(horizon)
        iters = np.empty(horizon, dtype=int)
        conv = np.empty(horizon, dtype=bool)
        for k in range(1, horizon + 1):
            n_stages = horizon - k + 1
            (bank_seed,) = _read_u(fh, "Q")
            expected = derive_seed(solver_config.seed, k, 1)
            if bank_seed != expected:
                raise ParseError(0, f"bank seed mismatch for sub-problem {k}")
            bank = make_noise_bank(model, n_stages, solver_config.bank_size, bank_seed)
            achieved[k - 1] = _read_f64(fh, 1)[0]
            iters[k - 1], conv_flag = _read_u(fh, "IB")
            conv[k - 1] = bool(conv_flag)
            for r in range(n_stages):
                p1, p2, theta, stopping = _read_f64(fh, 4)
                (has_grid,) = _read_u(fh, "B")
                grid = None
                if has_grid:
                    p1_lo, p1_hi, p2_lo, p2_hi = _read_f64(fh, 4)
                    n1, n2, ntheta, stage_idx = _read_u(fh, "IIII")
                    grid_cp = _read_f64(fh, 1)[0]
                    values = _read_f64(fh, n1 * n2 * ntheta).reshape(ntheta, n1, n2)
                    grid = ValueGrid(
                        geometry=GridGeometry(p1_lo, p1_hi, p2_lo, p2_hi, n1, n2, ntheta),
                        values_internal=values,
                        stage=stage_idx,
                        stopping_cost=grid_cp,
                    )
                entries[(k, k + r)] = StageSolution(
                    estimate=State(p1, p2, theta),
                    continuation=grid,
                    stopping_cost=stopping,
                    bank=bank,
                    stage=r,
                )
    table = SchemeTable(horizon=horizon, entries=entries, c_prime=c_prime)
    return LoadedScheme(
        run_config=run_config,
        table=table,
        costs=costs,
        c_prime=c_prime,
        model=model,
        achieved=achieved,
        iterations=iters,
        converged=conv,
    )


# ---------------------------------------------------------------------------
# text outputs


def write_csv(path, run_config: RunConfig, header, rows) -> None:
    """Comma-separated text with the config embedded as a leading comment."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config: {canonical_json(run_config.to_dict())}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(cell) for cell in row) + "\n")


def _format_cell(cell) -> str:
    if isinstance(cell, (bool, np.bool_)):
        return str(int(cell))
    if isinstance(cell, float):
        return repr(cell)
    if isinstance(cell, (np.floating,)):
        return repr(float(cell))
    return str(cell)


def write_convergence_log(path, chain, run_config: RunConfig) -> None:
    rows = []
    for sub in chain.subproblems:
        for i, g_value in enumerate(sub.g_history):
            rows.append((sub.k, i, g_value))
    write_csv(path, run_config, ("subproblem", "iteration", "G"), rows)


def write_model_file(path, model: SppModel, diagnostics: dict, run_config=None) -> None:
    doc = {"model": model_to_dict(model), "diagnostics": diagnostics}
    if run_config is not None:
        doc["config"] = run_config.to_dict()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2))
        fh.write("\n")


def read_model_file(path) -> SppModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return model_from_dict(doc["model"])
