"""Command-line front end: train, predict, probe."""

from __future__ import annotations

import argparse
import json
import sys

from .data import DriftData
from .formats import FormatError
from .predict import predict
from .probe import velocity_inversion_probe, write_report
from .train import LOSS_KINDS, TrainConfig, TrainingError, train
from .unet import ModelSpec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drift-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model per seed on a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="directory for checkpoints and logs")
    p.add_argument("--loss", choices=LOSS_KINDS, default="position")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    p.add_argument("--max-epochs", type=int, default=30)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--base-width", type=int, default=32)
    p.add_argument("--in-channels", type=int,
                   help="input channel count (default: from the dataset manifest)")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--no-stop-rule", action="store_true",
                   help="fixed learning rate, always run --max-epochs")

    p = sub.add_parser("predict", help="emit prediction maps for a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", required=True, help="output prediction directory")

    p = sub.add_parser("probe", help="velocity-inversion probe on one sample")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sample", type=int, required=True, help="sample index in the manifest")
    p.add_argument("--out", help="report JSON path (default: stdout only)")
    return parser


def cmd_train(args) -> int:
    data = DriftData(args.dataset)
    in_channels = data.n_channels if args.in_channels is None else args.in_channels
    spec = ModelSpec(in_channels=in_channels, depth=args.depth, base_width=args.base_width)
    cfg = TrainConfig(
        loss_kind=args.loss,
        lr=args.lr,
        batch_size=args.batch_size,
        plateau_patience_epochs=args.patience,
        stop_rule=not args.no_stop_rule,
        max_epochs=args.max_epochs,
        seeds=tuple(args.seeds),
    )
    for result in train(data, spec, cfg, args.out):
        best = "n/a" if result.best_val is None else f"{result.best_val:.6e}"
        print(
            f"seed {result.seed}: {result.epochs_run} epochs, "
            f"{result.decays_applied} decays, best val {best} -> {result.checkpoint_path}"
        )
    return 0


def cmd_predict(args) -> int:
    info = predict(args.checkpoint, args.dataset, args.split, args.out)
    print(f"wrote {info['n']} {info['split']} predictions to {info['out_dir']}")
    return 0


def cmd_probe(args) -> int:
    report = velocity_inversion_probe(args.checkpoint, args.dataset, args.sample)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        write_report(report, args.out)
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {"train": cmd_train, "predict": cmd_predict, "probe": cmd_probe}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FormatError, TrainingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
