"""SP test loss on the SPD-inverse task as the training set grows.

lambda shrinks as n^(-1/4); sigma is picked once by hold-out validation
unless --sigma is given. Prints the per-n median over seeds and writes the
full per-seed table to --out.

    python scripts/consistency.py --ns 50 100 200 400 --seeds 0 1 2 3 4
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from manisp.harness import consistency_curve


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--dim", type=int, default=5)
    ap.add_argument("--n-test", type=int, default=50)
    ap.add_argument("--sigma", type=float)
    ap.add_argument("--out", type=Path, default=Path("runs/consistency.json"))
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    r = consistency_curve(ns=args.ns, seeds=args.seeds, dim=args.dim, n_test=args.n_test, sigma=args.sigma)
    elapsed = time.perf_counter() - t0

    print(f"sigma = {r['sigma']:.4g}  ({elapsed:.1f}s)")
    print(f"{'n':>6} {'lambda':>8} {'median':>10} {'min':>10} {'max':>10}")
    for j, n in enumerate(r["ns"]):
        col = r["delta"][:, j]
        print(f"{n:>6} {n ** -0.25:>8.4f} {r['median'][j]:>10.4f} {col.min():>10.4f} {col.max():>10.4f}")
    ratios = r["median"][1:] / r["median"][:-1]
    print("consecutive median ratios:", np.round(ratios, 3).tolist())

    args.out.parent.mkdir(parents=True, exist_ok=True)
    doc = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in r.items()}
    doc["seconds"] = elapsed
    args.out.write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
