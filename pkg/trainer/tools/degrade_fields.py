"""Produce a degraded-resolution copy of a velocity-field file.

Fixture-generation tool: it uses the simulator's library (the trainer itself
never does) to Gaussian-smooth each day of a VFLD series, emulating a
coarser-resolution current product for the alternate-input experiments.

Usage: python3 tools/degrade_fields.py SRC DST [--sigma 1.0]
"""

from __future__ import annotations

import argparse

from driftlab import downgrade_resolution, load_field_series, store_field_series


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("src", help="input VFLD path")
    parser.add_argument("dst", help="output VFLD path")
    parser.add_argument("--sigma", type=float, default=1.0, help="smoothing radius in cells")
    args = parser.parse_args()
    series = load_field_series(args.src)
    store_field_series(downgrade_resolution(series, args.sigma), args.dst)
    print(f"wrote {args.dst} (sigma={args.sigma})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
