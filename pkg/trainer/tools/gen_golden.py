#!/usr/bin/env python3
"""Generate the shared golden loss fixtures.

Emits tests/golden/loss_fixtures.npz: 50 random (d_hat, d_t, d_next, r_hat,
ocean) batches plus the three loss values computed by the simulation
package's metrics module.  The trainer's loss tests replay these files, so
the two implementations are pinned to each other without a code dependency.

This tool is the one place on the trainer side that imports the simulation
package; run it from an environment with both packages installed:

    python3 tools/gen_golden.py
"""

from __future__ import annotations

import os

import numpy as np

from driftlab.metrics import l_drift, l_position, l_threshold

N_FIXTURES = 50
ROWS = COLS = 16
SEED = 7_2024


def random_fixture(rng: np.random.Generator, force_empty: bool):
    land = rng.random((ROWS, COLS)) < 0.2
    land[ROWS // 2, COLS // 2] = False  # keep at least one ocean pixel
    ocean = ~land

    def sparse_map():
        values = rng.random((ROWS, COLS))
        values[rng.random((ROWS, COLS)) < 0.5] = 0.0
        values[land] = 0.0
        return values

    d_t = sparse_map()
    d_next = sparse_map()
    r_hat = rng.normal(0.0, 0.3, (ROWS, COLS))
    if force_empty:
        # no mass anywhere: the thresholded foreground set is empty
        d_hat = np.zeros((ROWS, COLS))
        d_next = np.zeros((ROWS, COLS))
    else:
        d_hat = np.abs(sparse_map() + rng.normal(0.0, 0.1, (ROWS, COLS)))
        d_hat[land] = 0.0
    return d_hat, d_t, d_next, r_hat, ocean


def main() -> None:
    rng = np.random.Generator(np.random.Philox(key=SEED))
    payload = {}
    for k in range(N_FIXTURES):
        d_hat, d_t, d_next, r_hat, ocean = random_fixture(rng, force_empty=k % 10 == 9)
        payload[f"d_hat_{k:02d}"] = d_hat
        payload[f"d_t_{k:02d}"] = d_t
        payload[f"d_next_{k:02d}"] = d_next
        payload[f"r_hat_{k:02d}"] = r_hat
        payload[f"ocean_{k:02d}"] = ocean
        payload[f"losses_{k:02d}"] = np.array(
            [
                l_position(d_hat, d_next, ocean),
                l_drift(r_hat, d_t, d_next, ocean),
                l_threshold(d_hat, d_next, ocean),
            ]
        )
    payload["n_fixtures"] = np.array(N_FIXTURES)
    out = os.path.join(os.path.dirname(__file__), "..", "tests", "golden", "loss_fixtures.npz")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    np.savez_compressed(out, **payload)
    print(f"wrote {N_FIXTURES} fixtures to {os.path.normpath(out)}")


if __name__ == "__main__":
    main()
