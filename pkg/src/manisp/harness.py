"""Synthetic tasks, evaluation metrics and the benchmark runner.

The benchmark writes two artifacts into ``cfg.out_dir``:

``report.csv``
    header ``method,metric,mean,stddev,n_test,seed``; one row per
    (method, metric), rows in fixed order. Contains no timing data, so two
    runs with the same configuration produce identical bytes.
``report.json``
    config echo, CV tables, RGD trace summaries, feasibility checks,
    wall-clock seconds.
"""

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from manisp import matfun
from manisp.baseline import krls_cross_validate, krls_predict_ambient, krls_train
from manisp.estimator import CvGrid, Dataset, cross_validate, predict_batch, train
from manisp.manifolds import SPD, Euclidean, Simplex, Sphere, make_manifold
from manisp.rgd import RgdConfig

log = logging.getLogger(__name__)

haar_orthogonal = matfun.haar_orthogonal

EIG_LO = 0.1
EIG_HI = 10.0
TASKS = ("spd_inverse", "sphere_toy", "simplex_multilabel", "custom_file")
CSV_HEADER = ("method", "metric", "mean", "stddev", "n_test", "seed")


# data generation


def gen_spd_inverse_dataset(m, n, rng, eig_lo=EIG_LO, eig_hi=EIG_HI):
    """Inputs ``X = U diag(s) U^T`` (flattened), outputs ``X^{-1}``.

    ``U`` is Haar-distributed and ``s ~ Uniform[eig_lo, eig_hi]``.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    xs = np.empty((n, m, m))
    ys = np.empty((n, m, m))
    for i in range(n):
        u = haar_orthogonal(m, rng)
        s = rng.uniform(eig_lo, eig_hi, m)
        xs[i] = matfun.from_eig(s, u)
        ys[i] = matfun.from_eig(1.0 / s, u)
    return Dataset(xs.reshape(n, m * m), ys, SPD(m))


def _orientation_field(xy):
    x, y = xy[:, 0], xy[:, 1]
    return np.pi * (x**2 - y) + 0.5 * np.sin(3.0 * x * y)


def gen_sphere_toy_dataset(n, rng, noise=0.05):
    """Smooth 2-D orientation field: inputs in ``[-1, 1]^2``, outputs on the circle."""
    xy = rng.uniform(-1.0, 1.0, (n, 2))
    theta = _orientation_field(xy) + noise * rng.standard_normal(n)
    return Dataset(xy, np.column_stack([np.cos(theta), np.sin(theta)]), Sphere(2))


def gen_simplex_multilabel_dataset(m, n, rng, input_dim=5, eps=1e-5, map_seed=1234):
    """Multilabel task with outputs on the eps-simplex.

    A fixed random two-layer map (seeded by ``map_seed``) gives each input a
    latent label distribution; labels whose probability exceeds ``1/m`` are
    active (the top label always is). Outputs are the normalized label
    indicators pushed into the eps-interior.
    """
    mrng = np.random.default_rng(map_seed)
    a = mrng.standard_normal((input_dim, 2 * m))
    b = 2.0 * mrng.standard_normal((2 * m, m))
    x = rng.standard_normal((n, input_dim))
    logits = np.tanh(x @ a) @ b
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    labels = p > 1.0 / m
    labels[np.arange(n), np.argmax(p, axis=1)] = True
    man = Simplex(m, eps)
    hist = labels / labels.sum(axis=1, keepdims=True)
    outputs = np.stack([man.project(h) for h in hist])
    return Dataset(x, outputs, man, labels.astype(int))


def generate(cfg, n, rng):
    if cfg.task == "spd_inverse":
        return gen_spd_inverse_dataset(cfg.dim, n, rng)
    if cfg.task == "sphere_toy":
        return gen_sphere_toy_dataset(n, rng)
    if cfg.task == "simplex_multilabel":
        return gen_simplex_multilabel_dataset(cfg.dim, n, rng, input_dim=cfg.input_dim, eps=cfg.eps)
    raise ValueError(f"task {cfg.task!r} has no generator")


# dataset files


def dataset_to_records(data: Dataset):
    tag = data.manifold.to_dict()
    for i in range(len(data)):
        rec = {"x": data.inputs[i].tolist(), "y": data.manifold.point_to_json(data.outputs[i]), "tag": tag}
        if data.labels is not None:
            rec["labels"] = [int(v) for v in data.labels[i]]
        yield rec


def save_jsonl(data: Dataset, path):
    with open(path, "w") as fh:
        for rec in dataset_to_records(data):
            fh.write(json.dumps(rec) + "\n")


def load_jsonl(path):
    xs, ys, labels, manifold = [], [], [], None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            m = make_manifold(**_tag_args(rec["tag"]))
            if manifold is None:
                manifold = m
            elif m != manifold:
                raise ValueError(f"line {lineno}: manifold {m} differs from {manifold}")
            xs.append(rec["x"])
            ys.append(manifold.point_from_json(rec["y"]))
            if "labels" in rec:
                labels.append(rec["labels"])
    if manifold is None:
        raise ValueError(f"{path}: no records")
    lab = np.asarray(labels, dtype=int) if len(labels) == len(xs) else None
    data = Dataset(np.asarray(xs, dtype=float), np.stack(ys), manifold, lab)
    data.validate_outputs()
    return data


def _tag_args(tag):
    return {"name": tag["name"], "dim": tag["dim"], "eps": tag.get("eps")}


def load_orientation_csv(path):
    """CSV with header ``x,y,theta_radians``; theta maps to ``(cos, sin)`` on the circle."""
    arr = np.genfromtxt(path, delimiter=",", names=True)
    missing = {"x", "y", "theta_radians"} - set(arr.dtype.names or ())
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    arr = np.atleast_1d(arr)
    theta = arr["theta_radians"]
    return Dataset(np.column_stack([arr["x"], arr["y"]]), np.column_stack([np.cos(theta), np.sin(theta)]), Sphere(2))


def load_dataset(path):
    path = Path(path)
    if path.suffix == ".csv":
        return load_orientation_csv(path)
    return load_jsonl(path)


# metrics


def metric_frobenius_sq(pred, truth, manifold):
    """Squared ambient error divided by the number of ambient coordinates."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    return float(np.sum((p - t) ** 2) / manifold.ambient_size)


def metric_delta(pred, truth, manifold):
    return manifold.loss(pred, truth)


def metric_angular_degrees(pred, truth):
    u = float(np.clip(np.dot(pred, truth), -1.0, 1.0))
    return math.degrees(math.acos(u))


def metric_auc(preds, labels):
    """Micro-averaged ranking AUC.

    Over every (sample, positive label, negative label) triple, the fraction
    in which the positive label gets the higher predicted probability; ties
    count one half.
    """
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if preds.shape != labels.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {labels.shape}")
    wins = 0.0
    total = 0
    for p, lab in zip(preds, labels):
        pos, neg = p[lab], p[~lab]
        if pos.size == 0 or neg.size == 0:
            continue
        diff = pos[:, None] - neg[None, :]
        wins += np.sum(diff > 0) + 0.5 * np.sum(diff == 0)
        total += diff.size
    if total == 0:
        raise ValueError("AUC undefined: no sample has both positive and negative labels")
    return float(wins / total)


def evaluate_predictions(preds, data: Dataset):
    """Per-point metric arrays for predictions against ``data.outputs``."""
    M = data.manifold
    out = {
        "frobenius_sq": np.array([metric_frobenius_sq(p, t, M) for p, t in zip(preds, data.outputs)]),
        "delta": np.array([metric_delta(p, t, M) for p, t in zip(preds, data.outputs)]),
    }
    if isinstance(M, Sphere) and M.dim == 2:
        out["angular_deg"] = np.array([metric_angular_degrees(p, t) for p, t in zip(preds, data.outputs)])
    if isinstance(M, Simplex) and data.labels is not None:
        out["auc"] = np.array([metric_auc(preds, data.labels)])
    return out


# experiment configuration


@dataclass
class ExperimentConfig:
    task: str = "spd_inverse"
    dim: int = 5
    n_train: int = 200
    n_val: int = 50
    n_test: int = 50
    sigmas: tuple = tuple(np.geomspace(0.1, 1000.0, 7))
    lambdas: tuple = tuple(np.geomspace(1e-6, 1.0, 7))
    rgd: RgdConfig = field(default_factory=RgdConfig)
    seed: int = 0
    out_dir: str | None = None
    input_dim: int = 5
    eps: float = 1e-5
    data_file: str | None = None
    methods: tuple = ("sp", "krls")
    workers: int = 1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.seed is None:
            raise ValueError("seed is mandatory")
        for name in ("dim", "n_train", "n_val", "n_test", "input_dim", "workers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.task == "custom_file" and not self.data_file:
            raise ValueError("task custom_file needs data_file")
        if isinstance(self.rgd, dict):
            self.rgd = RgdConfig.from_dict(self.rgd)
        self.sigmas = tuple(float(s) for s in self.sigmas)
        self.lambdas = tuple(float(v) for v in self.lambdas)
        self.methods = tuple(self.methods)
        bad = set(self.methods) - {"sp", "krls"}
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        CvGrid(self.sigmas, self.lambdas)

    @classmethod
    def full_scale(cls, **kw):
        """Large split sizes (1000/100/100)."""
        return cls(n_train=1000, n_val=100, n_test=100, **kw)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["sigmas"] = list(self.sigmas)
        d["lambdas"] = list(self.lambdas)
        d["methods"] = list(self.methods)
        return d

    @property
    def grid(self):
        return CvGrid(self.sigmas, self.lambdas)


def split_pool(cfg, rng):
    """Draw a pool and partition it into disjoint train/val/test index sets."""
    n = cfg.n_train + cfg.n_val + cfg.n_test
    if cfg.task == "custom_file":
        pool = load_dataset(cfg.data_file)
        if len(pool) < n:
            raise ValueError(f"{cfg.data_file} has {len(pool)} samples, need {n}")
    else:
        pool = generate(cfg, n, rng)
    perm = rng.permutation(len(pool))
    tr = np.sort(perm[: cfg.n_train])
    va = np.sort(perm[cfg.n_train : cfg.n_train + cfg.n_val])
    te = np.sort(perm[cfg.n_train + cfg.n_val : n])
    return pool.subset(tr), pool.subset(va), pool.subset(te)


# benchmark


@dataclass
class MetricsReport:
    rows: list  # dicts with method, metric, mean, stddev, n_test, seed
    extra: dict  # JSON-only material

    def row(self, method, metric):
        for r in self.rows:
            if r["method"] == method and r["metric"] == metric:
                return r
        raise KeyError((method, metric))

    def mean(self, method, metric):
        return self.row(method, metric)["mean"]

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r["method"], r["metric"], repr(r["mean"]), repr(r["stddev"]), r["n_test"], r["seed"]])
        return buf.getvalue()

    def to_json(self):
        return {"rows": self.rows, **self.extra}

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.csv_text())
        (out / "report.json").write_text(json.dumps(_jsonable(self.to_json()), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _summarize(method, metrics, n_test, seed):
    rows = []
    for name, vals in metrics.items():
        rows.append(
            {
                "method": method,
                "metric": name,
                "mean": float(np.mean(vals)),
                "stddev": float(np.std(vals)),
                "n_test": int(n_test),
                "seed": int(seed),
            }
        )
    return rows


def feasibility(manifold, points):
    return [manifold.is_point(p) for p in points]


@contextmanager
def _executor(workers):
    if workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool


def run_benchmark(cfg: ExperimentConfig) -> MetricsReport:
    """Generate data, cross-validate SP and KRLS, evaluate on the test split.

    Deterministic given ``cfg``: every random draw comes from
    ``default_rng(cfg.seed)`` in a fixed order, and per-cell and per-query
    seeds are drawn before any work is farmed out, so ``cfg.workers`` never
    changes the results.
    """
    rng = np.random.default_rng(cfg.seed)
    train_set, val_set, test_set = split_pool(cfg, rng)
    M = train_set.manifold
    rows = []
    extra = {
        "config": cfg.to_dict(),
        "notes": {
            "eig_lo": EIG_LO if cfg.task == "spd_inverse" else None,
            "eig_lo_note": "input eigenvalues drawn from Uniform[0.1, 10] rather than [0, 10] to keep inverses bounded",
            "auc_variant": "micro-averaged ranking AUC over (sample, positive, negative) triples",
            "stddev": "stddev columns are over test points; aggregate repeated seeds for across-run spread",
        },
        "methods": {},
    }
    partial = MetricsReport(rows, extra)
    try:
        if "sp" in cfg.methods:
            t0 = time.perf_counter()
            with _executor(cfg.workers) as pool:
                best_s, best_l, table = cross_validate(train_set, cfg.grid, cfg.rgd, rng=rng, val=val_set, executor=pool)
                model = train(train_set, best_s, best_l, cfg.rgd)
                preds, traces = predict_batch(model, test_set.inputs, rng=rng, return_traces=True, executor=pool)
            elapsed = time.perf_counter() - t0
            feas = feasibility(M, preds)
            rows += _summarize("sp", evaluate_predictions(preds, test_set), len(test_set), cfg.seed)
            extra["methods"]["sp"] = {
                "sigma": best_s,
                "lambda": best_l,
                "cv_table": table,
                "wall_seconds": elapsed,
                "feasible_without_projection": all(feas),
                "n_infeasible": int(len(feas) - sum(feas)),
                "rgd": {
                    "converged": int(sum(t.converged for t in traces)),
                    "retried": int(sum(t.retried for t in traces)),
                    "mean_iterations": float(np.mean([t.iterations_run for t in traces])),
                    "max_final_grad_norm": float(max(t.final_grad_norm for t in traces)),
                },
            }
        if "krls" in cfg.methods:
            t0 = time.perf_counter()
            best_s, best_l, table = krls_cross_validate(train_set, cfg.grid, rng=rng, val=val_set)
            model = krls_train(train_set, best_s, best_l)
            raw = krls_predict_ambient(model, test_set.inputs)
            preds = np.stack([M.project(a) for a in raw])
            elapsed = time.perf_counter() - t0
            raw_feas = feasibility(M, raw)
            proj_feas = feasibility(M, preds)
            rows += _summarize("krls", evaluate_predictions(preds, test_set), len(test_set), cfg.seed)
            extra["methods"]["krls"] = {
                "sigma": best_s,
                "lambda": best_l,
                "cv_table": table,
                "wall_seconds": elapsed,
                "raw_feasible": int(sum(raw_feas)),
                "raw_infeasible": int(len(raw_feas) - sum(raw_feas)),
                "feasible_after_projection": all(proj_feas),
            }
    finally:
        if cfg.out_dir:
            partial.write(cfg.out_dir)
    return partial


# consistency


def consistency_curve(
    ns=(50, 100, 200, 400),
    seeds=range(5),
    dim=5,
    n_test=50,
    sigma=None,
    sigmas=tuple(np.geomspace(0.1, 1000.0, 7)),
    rgd=None,
    cv_seed=0,
    lam_fn=lambda n: n ** -0.25,
):
    """SP test loss on the SPD-inverse task as the training set grows.

    ``lambda`` follows ``lam_fn(n)``. Unless ``sigma`` is given it is chosen
    once, by hold-out validation (200 train / 50 val, ``lambda = lam_fn(200)``)
    on data drawn from ``default_rng(cv_seed)``. Each seed then draws one pool
    of ``max(ns)`` training points plus ``n_test`` test points; the training
    sets for the different ``n`` are nested prefixes of that pool.

    Returns a dict with ``sigma``, ``ns``, ``seeds``, ``delta`` (per-seed mean
    test loss, shape ``(len(seeds), len(ns))``) and ``median`` over seeds.
    """
    ns = [int(n) for n in ns]
    seeds = [int(s) for s in seeds]
    rgd = rgd or RgdConfig()
    cv_table = None
    if sigma is None:
        cv_rng = np.random.default_rng(cv_seed)
        pool = gen_spd_inverse_dataset(dim, 250, cv_rng)
        grid = CvGrid(sigmas, (lam_fn(200),))
        sigma, _, cv_table = cross_validate(pool.subset(range(200)), grid, rgd, rng=cv_rng, val=pool.subset(range(200, 250)))
    delta = np.empty((len(seeds), len(ns)))
    for i, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        pool = gen_spd_inverse_dataset(dim, max(ns) + n_test, rng)
        test = pool.subset(range(max(ns), max(ns) + n_test))
        for j, n in enumerate(ns):
            model = train(pool.subset(range(n)), sigma, lam_fn(n), rgd)
            preds = predict_batch(model, test.inputs, rng=rng)
            delta[i, j] = np.mean([pool.manifold.loss(p, t) for p, t in zip(preds, test.outputs)])
    return {
        "sigma": float(sigma),
        "cv_table": cv_table,
        "ns": ns,
        "seeds": seeds,
        "delta": delta,
        "median": np.median(delta, axis=0),
    }


# gradient check


def directional_fd(manifold, prep, alpha, y, v, h=1e-5):
    """Central difference of the objective along the retraction curve."""
    fp = manifold.objective(manifold.retract(y, h * v), prep, alpha)
    fm = manifold.objective(manifold.retract(y, -h * v), prep, alpha)
    return (fp - fm) / (2.0 * h)


def gradient_rel_error(manifold, prep, alpha, y, v, h=1e-5):
    """Relative error of ``<grad, v>_y`` against central differences.

    Normalized by ``max(|fd|, |<grad, v>|, |grad| |v|)``; the last term keeps
    the ratio meaningful when the directional derivative is near zero.
    """
    g = manifold.gradient(y, prep, alpha)
    an = manifold.inner(y, g, v)
    fd = directional_fd(manifold, prep, alpha, y, v, h)
    scale = max(abs(fd), abs(an), manifold.norm(y, g) * manifold.norm(y, v), np.finfo(float).tiny)
    return abs(fd - an) / scale


def _near_cut_locus(manifold, y, anchors, guard=1e-8):
    if isinstance(manifold, Sphere):
        return bool(np.any(anchors @ y < -1.0 + guard))
    return False


def run_gradcheck(manifold, trials, rng, n_anchors=4, h=1e-5, tol=1e-5):
    """Compare the Riemannian gradient against finite differences on random configurations."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    worst = 0.0
    excluded = 0
    for _ in range(trials):
        y = manifold.random_point(rng)
        anchors = np.stack([manifold.random_point(rng) for _ in range(n_anchors)])
        alpha = rng.uniform(-1.0, 1.0, n_anchors)
        if _near_cut_locus(manifold, y, anchors):
            excluded += 1
            continue
        v = manifold.random_tangent(y, rng)
        worst = max(worst, gradient_rel_error(manifold, manifold.prepare(anchors), alpha, y, v, h))
    return {
        "manifold": repr(manifold),
        "trials": trials,
        "excluded": excluded,
        "max_rel_err": worst,
        "tol": tol,
        "passed": worst <= tol,
    }


DEFAULT_GRADCHECK_MANIFOLDS = (
    Euclidean(3),
    Sphere(2),
    Sphere(3),
    Sphere(10),
    SPD(2),
    SPD(3),
    SPD(5),
    Simplex(3),
    Simplex(5),
)
