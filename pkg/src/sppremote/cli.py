"""Command-line entry point: fit, solve, simulate, evaluate.

Every command validates its configuration up front, embeds it in each
output file, and derives all randomness from the configured seed, so any
output can be reproduced byte for byte from its own header.

Exit codes: 0 ok, 2 I/O or input parsing, 3 degenerate policy,
4 non-convergence or fit failure, 5 horizon mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dynamics import derive_seed, simulate
from .errors import (
    DegeneracyError,
    FitError,
    HorizonMismatchError,
    ParseError,
    ProtocolError,
    TrackValidationError,
)
from .geometry import ORIGIN
from .ingestion import extract_increments, fit_model, load_track, track_to_trajectory
from .noise import wc_log_likelihood, weibull_log_likelihood
from .runtime import run_episode
from .schemeio import (
    RunConfig,
    model_from_dict,
    model_to_dict,
    read_model_file,
    read_scheme,
    write_convergence_log,
    write_csv,
    write_model_file,
    write_scheme,
)
from .solver import solve_chain, strict_nondegeneracy_report

EXIT_OK = 0
EXIT_IO = 2
EXIT_DEGENERACY = 3
EXIT_NONCONVERGENCE = 4
EXIT_MISMATCH = 5

# seed lane for episode simulation; the solver owns lanes (seed, k>=1, 1|2)
_EPISODE_LANE = 0


def episode_seed(seed: int, episode: int) -> int:
    return derive_seed(seed, _EPISODE_LANE, episode)


def _out_dir(args, run_config=None) -> Path:
    out = args.out or (run_config.out if run_config else None) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_model(run_config: RunConfig):
    """Return (model, run_config with inline parameters)."""
    if run_config.model is not None:
        return model_from_dict(run_config.model), run_config
    if run_config.model_file is not None:
        model = read_model_file(run_config.model_file)
    else:
        model = fit_model(load_track(run_config.track))
    return model, replace(
        run_config, model=model_to_dict(model), model_file=None, track=None
    )


def cmd_fit(args) -> int:
    track = load_track(args.track)
    model = fit_model(track)
    speeds, turns = extract_increments(track)
    positive = speeds[speeds > 0]
    diagnostics = {
        "n_speed_samples": int(positive.size),
        "n_turn_samples": int(turns.size),
        "speed_log_likelihood": weibull_log_likelihood(model.speed, positive),
        "turn_log_likelihood": wc_log_likelihood(model.turn, turns),
    }
    out = _out_dir(args)
    path = out / "model.json"
    write_model_file(path, model, diagnostics)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_solve(args) -> int:
    run_config = RunConfig.from_json_file(args.config).with_overrides(
        seed=args.seed, out=args.out
    )
    model, run_config = _resolve_model(run_config)
    chain = solve_chain(
        run_config.horizon,
        run_config.cost_vector(),
        model,
        run_config.solver_config(),
    )
    out = _out_dir(args, run_config)
    scheme_path = out / "scheme.bin"
    write_scheme(scheme_path, chain, run_config)
    write_convergence_log(out / "convergence.csv", chain, run_config)
    report = strict_nondegeneracy_report(chain)
    print(f"wrote {scheme_path} (min survival {report.min_survival:.4f})")
    stalled = [sub.k for sub in chain.subproblems if not sub.converged]
    if stalled:
        print(f"sub-problems did not converge: {stalled}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_simulate(args) -> int:
    run_config = RunConfig.from_json_file(args.config).with_overrides(
        seed=args.seed, out=args.out
    )
    model, run_config = _resolve_model(run_config)
    out = _out_dir(args, run_config)
    rows = []
    for episode in range(args.episodes):
        traj = simulate(
            model, ORIGIN, run_config.horizon, episode_seed(run_config.seed, episode)
        )
        for k, state in enumerate(traj):
            rows.append((episode, k, state.p1, state.p2, state.theta))
    path = out / "trajectories.csv"
    write_csv(path, run_config, ("episode", "k", "p1_m", "p2_m", "theta_rad"), rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    loaded = read_scheme(args.scheme)
    run_config = loaded.run_config.with_overrides(seed=args.seed, out=args.out)
    out = _out_dir(args, run_config)

    if args.track is not None:
        trajectories = [track_to_trajectory(load_track(args.track))]
    else:
        trajectories = [
            simulate(
                loaded.model,
                ORIGIN,
                loaded.table.horizon,
                episode_seed(run_config.seed, episode),
            )
            for episode in range(args.episodes)
        ]

    def one(traj):
        return run_episode(loaded.table, traj, loaded.costs, force=args.force)

    workers = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, trajectories))
    else:
        reports = [one(traj) for traj in trajectories]

    step_rows = []
    summary_rows = []
    for episode, report in enumerate(reports):
        for i in range(len(report.distortions)):
            step_rows.append(
                (episode, i + 1, float(report.distortions[i]), bool(report.transmitted[i]))
            )
        summary_rows.append(
            (
                episode,
                report.distortion_sq_sum,
                report.n_transmissions,
                report.realized_cost,
            )
        )
    write_csv(out / "steps.csv", run_config, ("episode", "k", "distortion", "transmitted"), step_rows)
    write_csv(
        out / "summary.csv",
        run_config,
        ("episode", "distortion_sq_sum", "n_transmissions", "realized_cost"),
        summary_rows,
    )
    mean_cost = float(np.mean([r.realized_cost for r in reports]))
    print(f"wrote {out / 'summary.csv'} (mean realized cost {mean_cost:.4f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sppremote",
        description="Transmission policy and estimator co-design for a self-propelled particle",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument(
            "--threads", type=int, default=1, help="worker threads (0 = auto)"
        )

    p_fit = sub.add_parser("fit", help="fit motion-model parameters to a GPS track")
    p_fit.add_argument("--track", required=True, help="CSV track file")
    common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_solve = sub.add_parser("solve", help="solve the policy/estimator chain")
    p_solve.add_argument("--config", required=True, help="run configuration JSON")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate", help="simulate trajectories from the model")
    p_sim.add_argument("--config", required=True, help="run configuration JSON")
    p_sim.add_argument("--episodes", type=int, default=1)
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser("evaluate", help="run a scheme over trajectories")
    p_eval.add_argument("--scheme", required=True, help="scheme file from solve")
    p_eval.add_argument("--episodes", type=int, default=1)
    p_eval.add_argument("--track", default=None, help="evaluate on a GPS track instead")
    p_eval.add_argument(
        "--force",
        choices=("transmit", "silent"),
        default=None,
        help="override the policy for baseline runs",
    )
    common(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParseError, TrackValidationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (HorizonMismatchError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
