"""One-off 200-seed calibration of the noise bands and the floor constant.

Writes tests/fixtures/bands.json. The acceptance suite reads the frozen
bands from there and never re-runs this script.

    python3 tests/calibration/calibrate_bands.py
"""

import json
import os
import sys
import time

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(HERE))

from scalings import (  # noqa: E402
    BERN_REF,
    FLOOR_REF,
    FLOOR_SIGMAS,
    QUAD_REF,
    bern_ratios,
    floor_ratio,
    quad_ratios,
)

N_SEEDS = 200
BAND = (0.3, 3.0)
FLOOR_C = 10.0


def summarize(values):
    v = np.asarray(values, dtype=float)
    return {
        "median": float(np.median(v)),
        "p05": float(np.quantile(v, 0.05)),
        "p95": float(np.quantile(v, 0.95)),
        "max": float(v.max()),
    }


def main():
    t0 = time.time()
    quad = [quad_ratios(s) for s in range(N_SEEDS)]
    bern = [bern_ratios(s) for s in range(N_SEEDS)]
    floors = {sig: [floor_ratio(sig, s) for s in range(N_SEEDS)] for sig in FLOOR_SIGMAS}
    lo, hi = FLOOR_SIGMAS
    doubling = [floors[hi][s][0] / floors[lo][s][0] for s in range(N_SEEDS)]

    out = {
        "n_seeds": N_SEEDS,
        "band": list(BAND),
        "quadratic": {"reference": QUAD_REF, "ratios": {k: summarize([d[k] for d in quad]) for k in quad[0]}},
        "bernoulli": {"reference": BERN_REF, "ratios": {k: summarize([d[k] for d in bern]) for k in bern[0]}},
        "floor": {
            "reference": FLOOR_REF,
            "C": FLOOR_C,
            "ratio_to_scale": {str(sig): summarize([f[1] for f in floors[sig]]) for sig in FLOOR_SIGMAS},
            "doubling_ratio": summarize(doubling),
        },
    }
    for model in ("quadratic", "bernoulli"):
        for key, stats in out[model]["ratios"].items():
            if key == "bar_over_alpha_sigma":
                continue
            if not BAND[0] <= stats["median"] <= BAND[1]:
                raise SystemExit(f"{model} {key} median {stats['median']:.3f} outside the band {BAND}")
    for sig, stats in out["floor"]["ratio_to_scale"].items():
        if stats["max"] > FLOOR_C:
            raise SystemExit(f"floor ratio at sigma={sig} reaches {stats['max']:.3f} > C = {FLOOR_C}")

    path = os.path.join(os.path.dirname(HERE), "fixtures", "bands.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)
    print(json.dumps(out, indent=1))
    print(f"wrote {path} in {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
