"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from manisp import harness
from manisp.baseline import KrlsModel, krls_cross_validate, krls_predict, krls_train
from manisp.errors import NumericalFailure
from manisp.estimator import CvGrid, PredictorModel, cross_validate, predict_batch, train
from manisp.manifolds import make_manifold
from manisp.rgd import RgdConfig

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("manisp")


class ConfigError(Exception):
    pass


def _shared(p):
    p.add_argument("--manifold", choices=["euclidean", "sphere", "spd", "simplex"])
    p.add_argument("--dim", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", type=Path, help="JSON file with default values for these flags")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--max-iters", type=int)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--init-step", type=float)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="manisp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    _shared(p)
    p.add_argument("--task", default="spd_inverse", choices=["spd_inverse", "sphere_toy", "simplex_multilabel"])
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--input-dim", type=int, default=5)
    p.add_argument("--csv", action="store_true", help="write sphere_toy as an x,y,theta_radians CSV")

    p = sub.add_parser("train", help="fit a model (cross-validates if --sigma/--lambda are missing)")
    _shared(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--method", choices=["sp", "krls"], default="sp")

    p = sub.add_parser("predict", help="predict outputs for every input of a dataset file")
    _shared(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("eval", help="score predictions against a dataset")
    _shared(p)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("benchmark", help="run the SP vs KRLS benchmark")
    _shared(p)
    p.add_argument("--task", choices=list(harness.TASKS))
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-val", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--sigmas", type=float, nargs="+")
    p.add_argument("--lambdas", type=float, nargs="+")
    p.add_argument("--data-file", type=str)
    p.add_argument("--full-scale", action="store_true", help="1000/100/100 split sizes")
    p.add_argument("--workers", type=int, help="processes for grid cells and test queries")

    p = sub.add_parser("gradcheck", help="finite-difference check of the Riemannian gradients")
    _shared(p)
    p.add_argument("--trials", type=int, default=50)
    return parser


def _load_config(args):
    if args.config is None:
        return {}
    try:
        cfg = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _pick(args, cfg, name, key=None, default=None):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return cfg.get(key or name, default)


def _rgd(args, cfg):
    d = dict(cfg.get("rgd", {}))
    for flag, key in (("max_iters", "max_iters"), ("grad_tol", "grad_tol"), ("init_step", "init_step")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    return RgdConfig.from_dict(d)


def _rng(args, cfg):
    return np.random.default_rng(_pick(args, cfg, "seed", default=0))


def _out_dir(args):
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_gen_data(args, cfg):
    task = _pick(args, cfg, "task")
    n = _pick(args, cfg, "n")
    rng = _rng(args, cfg)
    dim = _pick(args, cfg, "dim", default=5)
    if task == "spd_inverse":
        data = harness.gen_spd_inverse_dataset(dim, n, rng)
    elif task == "sphere_toy":
        data = harness.gen_sphere_toy_dataset(n, rng)
    else:
        data = harness.gen_simplex_multilabel_dataset(dim, n, rng, input_dim=_pick(args, cfg, "input_dim"))
    out = _out_dir(args)
    if args.csv:
        if task != "sphere_toy":
            raise ConfigError("--csv is only available for sphere_toy")
        path = out / "data.csv"
        theta = np.arctan2(data.outputs[:, 1], data.outputs[:, 0])
        rows = np.column_stack([data.inputs, theta])
        np.savetxt(path, rows, delimiter=",", header="x,y,theta_radians", comments="", fmt="%.17g")
    else:
        path = out / "data.jsonl"
        harness.save_jsonl(data, path)
    print(path)


def _check_manifold(args, cfg, data):
    name = _pick(args, cfg, "manifold")
    if name is None:
        return
    dim = _pick(args, cfg, "dim", default=data.manifold.dim)
    if (name, dim) != (data.manifold.name, data.manifold.dim):
        raise ConfigError(f"--manifold {name} --dim {dim} does not match the data ({data.manifold})")


def cmd_train(args, cfg):
    data = harness.load_dataset(args.data)
    _check_manifold(args, cfg, data)
    sigma = _pick(args, cfg, "sigma")
    lam = _pick(args, cfg, "lam", key="lambda")
    rgd = _rgd(args, cfg)
    cv = None
    if sigma is None or lam is None:
        grid = CvGrid(
            cfg.get("sigmas") or ([sigma] if sigma else CvGrid.logspaced().sigmas),
            cfg.get("lambdas") or ([lam] if lam else CvGrid.logspaced().lambdas),
        )
        rng = _rng(args, cfg)
        if args.method == "sp":
            sigma, lam, table = cross_validate(data, grid, rgd, rng)
        else:
            sigma, lam, table = krls_cross_validate(data, grid, rng)
        cv = table
    model = train(data, sigma, lam, rgd) if args.method == "sp" else krls_train(data, sigma, lam)
    path = _out_dir(args) / "model.json"
    doc = model.to_dict()
    path.write_text(json.dumps(doc) + "\n")
    if cv is not None:
        (args.out / "cv.json").write_text(json.dumps(cv, indent=2) + "\n")
    print(json.dumps({"model": str(path), "sigma": sigma, "lambda": lam}))


def load_model(path):
    doc = json.loads(Path(path).read_text())
    kind = doc.get("kind", "sp")
    if kind == "sp":
        return PredictorModel.from_dict(doc)
    if kind == "krls":
        return KrlsModel.from_dict(doc)
    raise ConfigError(f"unknown model kind {kind!r}")


def cmd_predict(args, cfg):
    model = load_model(args.model)
    data = harness.load_dataset(args.data)
    if isinstance(model, PredictorModel):
        overrides = {**model.rgd.to_dict(), **cfg.get("rgd", {})}
        model = replace(model, rgd=_rgd(args, {"rgd": overrides}))
        preds = predict_batch(model, data.inputs, rng=_rng(args, cfg))
    else:
        preds = krls_predict(model, data.inputs)
    M = model.manifold
    path = _out_dir(args) / "predictions.jsonl"
    with open(path, "w") as fh:
        for x, y in zip(data.inputs, preds):
            fh.write(json.dumps({"x": x.tolist(), "y": M.point_to_json(y), "tag": M.to_dict()}) + "\n")
    print(path)


def cmd_eval(args, cfg):
    preds = harness.load_jsonl(args.predictions)
    truth = harness.load_dataset(args.data)
    if preds.manifold != truth.manifold or len(preds) != len(truth):
        raise ConfigError("predictions and data disagree in manifold or length")
    metrics = harness.evaluate_predictions(preds.outputs, truth)
    summary = {k: {"mean": float(np.mean(v)), "stddev": float(np.std(v))} for k, v in metrics.items()}
    summary["n"] = len(truth)
    summary["feasible"] = all(harness.feasibility(truth.manifold, preds.outputs))
    text = json.dumps(summary, indent=2, sort_keys=True)
    (_out_dir(args) / "eval.json").write_text(text + "\n")
    print(text)


def cmd_benchmark(args, cfg):
    d = {k: v for k, v in cfg.items() if k in harness.ExperimentConfig.__dataclass_fields__}
    for flag, key in (
        ("task", "task"),
        ("dim", "dim"),
        ("n_train", "n_train"),
        ("n_val", "n_val"),
        ("n_test", "n_test"),
        ("sigmas", "sigmas"),
        ("lambdas", "lambdas"),
        ("seed", "seed"),
        ("data_file", "data_file"),
        ("workers", "workers"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    if args.full_scale:
        d.update(n_train=1000, n_val=100, n_test=100)
    d["rgd"] = _rgd(args, cfg)
    d["out_dir"] = str(args.out)
    exp = harness.ExperimentConfig.from_dict(d)
    report = harness.run_benchmark(exp)
    sys.stdout.write(report.csv_text())


def cmd_gradcheck(args, cfg):
    rng = _rng(args, cfg)
    name = _pick(args, cfg, "manifold")
    if name:
        manifolds = [make_manifold(name, _pick(args, cfg, "dim", default=3))]
    else:
        manifolds = list(harness.DEFAULT_GRADCHECK_MANIFOLDS)
    results = [harness.run_gradcheck(M, args.trials, rng) for M in manifolds]
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"{status} {r['manifold']:<24} max_rel_err={r['max_rel_err']:.3e} trials={r['trials']} excluded={r['excluded']}")
    (_out_dir(args) / "gradcheck.json").write_text(json.dumps(results, indent=2) + "\n")
    return 0 if all(r["passed"] for r in results) else EXIT_NUMERICAL


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "benchmark": cmd_benchmark,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg) or 0
    except NumericalFailure as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, KeyError, TypeError, FileNotFoundError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
