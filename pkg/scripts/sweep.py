"""Sweep the SP vs KRLS benchmark over output dimensions and seeds.

Writes one benchmark directory per (dim, seed) under --out plus summary.csv
with, for every (dim, method, metric):

* mean and stddev of the per-seed means (spread across repetitions)
* mean of the per-seed stddevs (spread across test points)

    python scripts/sweep.py --dims 3 5 10 --seeds 0 1 2 --out runs/sweep
    python scripts/sweep.py --full-scale --dims 5 --seeds 0
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from manisp.harness import ExperimentConfig, run_benchmark


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--task", default="spd_inverse", choices=["spd_inverse", "sphere_toy", "simplex_multilabel"])
    ap.add_argument("--dims", type=int, nargs="+", default=[3, 5, 10])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--full-scale", action="store_true", help="1000/100/100 splits instead of 200/50/50")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/sweep"))
    args = ap.parse_args(argv)

    sizes = dict(n_train=1000, n_val=100, n_test=100) if args.full_scale else {}
    per_seed = {}
    for dim in args.dims:
        for seed in args.seeds:
            t0 = time.perf_counter()
            out = args.out / f"{args.task}_dim{dim}_seed{seed}"
            cfg = ExperimentConfig(task=args.task, dim=dim, seed=seed, out_dir=str(out), workers=args.workers, **sizes)
            report = run_benchmark(cfg)
            for r in report.rows:
                per_seed.setdefault((dim, r["method"], r["metric"]), []).append((r["mean"], r["stddev"]))
            print(f"dim={dim} seed={seed} done in {time.perf_counter() - t0:.1f}s", file=sys.stderr)

    args.out.mkdir(parents=True, exist_ok=True)
    header = ["dim", "method", "metric", "mean", "std_over_seeds", "std_over_test_points", "n_seeds"]
    rows = []
    for (dim, method, metric), vals in sorted(per_seed.items()):
        means, stds = np.array(vals).T
        rows.append([dim, method, metric, float(means.mean()), float(means.std()), float(stds.mean()), len(vals)])
    with open(args.out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    print(f"{'dim':>4} {'method':<6} {'metric':<13} {'mean':>12} {'+-seeds':>10} {'+-points':>10}")
    for dim, method, metric, mean, s_seed, s_pts, _ in rows:
        print(f"{dim:>4} {method:<6} {metric:<13} {mean:>12.4g} {s_seed:>10.3g} {s_pts:>10.3g}")


if __name__ == "__main__":
    main()
