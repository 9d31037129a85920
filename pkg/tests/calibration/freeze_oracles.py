"""Compute oracle reference values once and store them in tests/fixtures/oracle_values.json.

Instances are drawn from plain numpy generators so the frozen numbers do not
depend on any code in the package. Re-run only when an oracle changes:

    python3 tests/calibration/freeze_oracles.py
"""

import json
import os
import sys

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(HERE))

from oracles import (  # noqa: E402
    brute_gl_scalar,
    brute_procrustes,
    hessian_sym_quadratic_n2r1,
    scalar_asym_step,
    scalar_sym_step,
)


def procrustes_instance(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 9))
    r = 1 + seed % 2
    n = max(n, r)
    return rng.standard_normal((n, r)), rng.standard_normal((n, r))


def gl_instance(seed):
    rng = np.random.default_rng(2000 + seed)
    us = rng.standard_normal(3) + 1.0
    vs = rng.standard_normal(3) + 1.0
    # rescale to balance the truth: |us|^2 / n == |vs|^2 / q
    k = np.sqrt(np.linalg.norm(vs) / np.linalg.norm(us))
    us, vs = us * k, vs / k
    g0 = rng.uniform(0.5, 2.0) * rng.choice([-1, 1])
    u = us / g0 + 0.2 * rng.standard_normal(3)
    v = vs * g0 + 0.2 * rng.standard_normal(3)
    return u, v, us, vs


def main():
    out = {}
    out["procrustes"] = [
        {"seed": s, "objective": brute_procrustes(*procrustes_instance(s))} for s in range(20)
    ]
    out["gl_scalar"] = []
    for s in range(10):
        g, f = brute_gl_scalar(*gl_instance(s))
        out["gl_scalar"].append({"seed": s, "g": g, "objective": f})

    z, seq = 0.7, []
    for _ in range(5):
        z = scalar_sym_step(z, 1.3, 0.0, 0.05)
        seq.append(z)
    out["scalar_sym"] = {"z0": 0.7, "z_star": 1.3, "eta": 0.05, "sequence": seq}

    u, v, seq = 0.5, 1.5, []
    for _ in range(5):
        u, v = scalar_asym_step(u, v, 2.0, 0.1)
        seq.append([u, v])
    out["scalar_asym"] = {"u0": 0.5, "v0": 1.5, "x_star": 2.0, "eta": 0.1, "sequence": seq}

    z = np.array([0.9, -0.4])
    zs = np.array([1.0, 0.5])
    out["hessian_n2r1"] = {"z": z.tolist(), "z_star": zs.tolist(), "H": hessian_sym_quadratic_n2r1(z, zs).tolist()}

    out["hand"] = {
        "sensing_single_value": 0.5,
        "bernoulli_scalar_value": float(np.log(2.0)),
        "bernoulli_scalar_grad_over_nu": -0.5,
    }

    path = os.path.join(os.path.dirname(HERE), "fixtures", "oracle_values.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
