"""Command-line pipeline driver.

Subcommands: gen-flow (synthesize a velocity field series), simulate (deploy
and advect probabilistic trajectories), dataset (extract and persist training
records), eval (loss reports over a dataset split), export-maps (figure-ready
PGM/CSV grids).  All randomness is seeded through flags, so every subcommand
is deterministic given its full argument list, including under --threads.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .advection import AdvectionConfig
from .dataset import (
    CHANNEL_SCHEMAS,
    extract_pairs,
    read_dataset,
    split_trajectories,
    write_dataset,
)
from .density import write_density_map
from .ensemble import (
    DeploymentPlan,
    EnsembleConfig,
    deploy,
    read_trajectory,
    write_trajectory,
)
from .errors import DataError, FormatError
from .grid import (
    FLOW_KINDS,
    DomainGrid,
    SyntheticFlowSpec,
    generate_synthetic_series,
    load_field_series,
    store_field_series,
    synthetic_land_mask,
)
from .metrics import (
    LossKind,
    evaluate_predictions,
    identity_baseline,
    read_prediction_set,
    recover_from_drift,
    write_loss_report,
)

TRAJ_PATTERN = "traj_{:05d}.traj"


def _common_flags(parser: argparse.ArgumentParser, out_required: bool, out_help: str):
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    parser.add_argument("--out", required=out_required, help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="Simulate ocean drift trajectories and build density-map datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-flow", help="synthesize a velocity field series (VFLD)")
    p.add_argument("--kind", choices=FLOW_KINDS, required=True)
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--days", type=int, default=40)
    p.add_argument("--cell-km", type=float, nargs=2, default=(1.3, 1.3), metavar=("KMX", "KMY"))
    p.add_argument("--land", choices=("none", "island", "coast"), default="none")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--direction-deg", type=float, default=0.0)
    p.add_argument("--direction-rate", type=float, default=0.0,
                   help="uniform: direction change in deg/day (default 0)")
    p.add_argument("--period-days", type=float, default=10.0)
    p.add_argument("--gyre-eps", type=float, default=0.25)
    p.add_argument("--eddy-count", type=int, default=8)
    p.add_argument("--eddy-scale", type=float, default=8.0)
    _common_flags(p, True, "output VFLD path")

    p = sub.add_parser("simulate", help="deploy and advect probabilistic trajectories (TRAJ)")
    p.add_argument("--fields", required=True, help="input VFLD path")
    p.add_argument("--n-traj", type=int, required=True)
    p.add_argument("--np", type=int, default=10000, dest="n_particles")
    p.add_argument("--radius-km", type=float, default=5.0)
    p.add_argument("--substep-days", type=float, default=0.25)
    p.add_argument("--save-days", type=float, default=1.0)
    p.add_argument("--duration-days", type=float, default=30.0)
    p.add_argument("--window", type=float, nargs=2, metavar=("FIRST", "LAST"),
                   help="deployment day window (default: full series)")
    _common_flags(p, True, "output directory for TRAJ files")

    p = sub.add_parser("dataset", help="extract training records into a dataset directory")
    p.add_argument("--fields", required=True, help="input VFLD path")
    p.add_argument("--traj-dir", required=True, help="directory of TRAJ files")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--schema", choices=sorted(CHANNEL_SCHEMAS), default="uv")
    p.add_argument("--ratios", type=float, nargs=3, default=(0.70, 0.15, 0.15),
                   metavar=("TRAIN", "VAL", "TEST"))
    _common_flags(p, True, "output dataset directory")

    p = sub.add_parser("eval", help="loss report over a dataset split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--predictions", help="prediction directory (default: identity baseline)")
    _common_flags(p, False, "report JSON path (default: report to stdout only)")

    p = sub.add_parser("export-maps", help="export one sample's grids as 16-bit PGM + CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sample", type=int, default=0, help="sample index (default 0)")
    p.add_argument("--predictions", help="prediction directory to export d_hat/r_hat from")
    _common_flags(p, True, "output directory")
    return parser


def cmd_gen_flow(args) -> int:
    grid = DomainGrid(
        rows=args.rows,
        cols=args.cols,
        cell_size_km=tuple(args.cell_km),
        land_mask=synthetic_land_mask(args.rows, args.cols, args.land),
    )
    spec = SyntheticFlowSpec(
        kind=args.kind,
        amplitude=args.amplitude,
        direction_deg=args.direction_deg,
        direction_rate_deg_per_day=args.direction_rate,
        period_days=args.period_days,
        gyre_eps=args.gyre_eps,
        eddy_count=args.eddy_count,
        eddy_scale_cells=args.eddy_scale,
        seed=args.seed,
    )
    series = generate_synthetic_series(spec, grid, args.days)
    store_field_series(series, args.out)
    ocean = int(grid.ocean_mask.sum())
    print(
        f"wrote {args.out}: {grid.rows}x{grid.cols} grid "
        f"({ocean} ocean cells), {args.days} days, kind={args.kind}"
    )
    return 0


def cmd_simulate(args) -> int:
    series = load_field_series(args.fields)
    if args.window is not None:
        window = (args.window[0], args.window[1])
    else:
        window = (float(series.times[0]), float(series.times[-1]))
    plan = DeploymentPlan(n_trajectories=args.n_traj, time_window=window, seed=args.seed)
    e_cfg = EnsembleConfig(
        n_particles=args.n_particles, perturb_radius_km=args.radius_km, seed=args.seed
    )
    a_cfg = AdvectionConfig(
        substep_days=args.substep_days,
        save_interval_days=args.save_days,
        max_duration_days=args.duration_days,
    )
    trajectories = deploy(series, plan, e_cfg, a_cfg, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    entries = []
    for k, traj in enumerate(trajectories):
        name = TRAJ_PATTERN.format(k)
        write_trajectory(traj, os.path.join(args.out, name))
        entries.append(
            {
                "file": name,
                "deployed_count": traj.deployed_count,
                "snapshots": len(traj.snapshots),
                "deploy_time": traj.deploy_time,
            }
        )
    run = {
        "fields": os.path.basename(args.fields),
        "plan": {"n_trajectories": plan.n_trajectories, "time_window": list(plan.time_window), "seed": plan.seed},
        "ensemble": dataclasses.asdict(e_cfg),
        "advection": dataclasses.asdict(a_cfg),
        "trajectories": entries,
    }
    with open(os.path.join(args.out, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(run, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(trajectories)} trajectories to {args.out}")
    return 0


def cmd_dataset(args) -> int:
    series = load_field_series(args.fields)
    names = sorted(n for n in os.listdir(args.traj_dir) if n.endswith(".traj"))
    if not names:
        raise DataError(f"{args.traj_dir}: no .traj files found")
    trajectories = [(k, read_trajectory(os.path.join(args.traj_dir, n))) for k, n in enumerate(names)]
    split = split_trajectories([k for k, _ in trajectories], ratios=tuple(args.ratios), seed=args.seed)
    pairs = []
    for k, traj in trajectories:
        pairs.extend(extract_pairs(traj, series, sigma=args.sigma, trajectory_id=k, schema=args.schema))
    write_dataset(pairs, split, series, args.out, sigma=args.sigma, schema=args.schema)
    print(
        f"wrote {len(pairs)} records from {len(trajectories)} trajectories to {args.out} "
        f"(split {len(split.train)}/{len(split.val)}/{len(split.test)})"
    )
    return 0


def cmd_eval(args) -> int:
    ds = read_dataset(args.dataset)
    if args.predictions is None:
        report = identity_baseline(ds, split=args.split)
        source = "identity baseline"
    else:
        kind, pred_split, sample_indices, maps = read_prediction_set(args.predictions)
        if pred_split != args.split:
            raise DataError(
                f"prediction set covers split {pred_split!r}, requested {args.split!r}"
            )
        expected = ds.split_sample_indices(args.split)
        if sample_indices != expected:
            raise DataError(
                f"prediction sample indices do not match split {args.split!r} "
                f"({len(sample_indices)} vs {len(expected)} samples)"
            )
        report = evaluate_predictions(maps, ds, args.split, kind)
        source = f"predictions ({kind.value})"
    print(
        f"{args.split} {source}: mean={report.mean:.6e} std={report.std:.6e} n={report.n}"
    )
    if args.out:
        write_loss_report(report, args.out)
        print(f"wrote {args.out}")
    return 0


def _write_pgm16(values: np.ndarray, path) -> None:
    # 16-bit PGM, max-normalized; offset/span recorded in a header comment
    lo = float(min(values.min(), 0.0))
    span = float(values.max() - lo)
    if span <= 0.0:
        span = 1.0
    scaled = np.round((values - lo) / span * 65535.0).astype(">u2")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        fh.write(f"# offset {lo!r} span {span!r}\n".encode())
        fh.write(f"{cols} {rows}\n65535\n".encode())
        fh.write(scaled.tobytes())


def _write_csv(values: np.ndarray, path) -> None:
    np.savetxt(path, values, delimiter=",", fmt="%.17g")


def _export_grid(values: np.ndarray, out_dir: str, name: str) -> None:
    _write_pgm16(values, os.path.join(out_dir, f"{name}.pgm"))
    _write_csv(values, os.path.join(out_dir, f"{name}.csv"))


def cmd_export_maps(args) -> int:
    ds = read_dataset(args.dataset)
    if not 0 <= args.sample < len(ds):
        raise DataError(f"sample index {args.sample} out of range (dataset has {len(ds)})")
    pair = ds.load_pair(args.sample)
    os.makedirs(args.out, exist_ok=True)
    _export_grid(pair.d_t, args.out, "d_t")
    _export_grid(pair.target.values, args.out, "d_next")
    _export_grid(pair.target.values - pair.d_t, args.out, "r")
    exported = ["d_t", "d_next", "r"]
    if args.predictions is not None:
        kind, _, sample_indices, maps = read_prediction_set(args.predictions)
        if args.sample not in sample_indices:
            raise DataError(f"sample {args.sample} is not covered by the prediction set")
        values = maps[sample_indices.index(args.sample)]
        if kind is LossKind.DRIFT:
            _export_grid(values, args.out, "r_hat")
            d_hat = recover_from_drift(values, pair.d_t, ds.grid)
        else:
            d_hat = values
            _export_grid(d_hat - pair.d_t, args.out, "r_hat")
        _export_grid(d_hat, args.out, "d_hat")
        exported += ["d_hat", "r_hat"]
    print(f"exported {', '.join(exported)} for sample {args.sample} to {args.out}")
    return 0


_COMMANDS = {
    "gen-flow": cmd_gen_flow,
    "simulate": cmd_simulate,
    "dataset": cmd_dataset,
    "eval": cmd_eval,
    "export-maps": cmd_export_maps,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FormatError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
