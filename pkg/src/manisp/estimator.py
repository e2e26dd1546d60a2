"""The structured predictor: ridge scores at train time, RGD at test time."""

import math
from dataclasses import dataclass, field
from functools import cached_property, partial

import numpy as np

from manisp.kernelscores import ScoreModel, fit_scores, scores
from manisp.manifolds import Manifold, manifold_from_dict
from manisp.rgd import RgdConfig, minimize

MODEL_VERSION = "1"


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray  # (n, p)
    outputs: np.ndarray  # (n, *manifold.ambient_shape)
    manifold: Manifold
    labels: np.ndarray | None = None  # optional binary label sets (multilabel tasks)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.outputs, dtype=float)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)
        if y.shape[0] != x.shape[0]:
            raise ValueError(f"{x.shape[0]} inputs but {y.shape[0]} outputs")
        if y.shape[1:] != self.manifold.ambient_shape:
            raise ValueError(f"outputs have shape {y.shape[1:]}, manifold expects {self.manifold.ambient_shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite inputs")

    def __len__(self):
        return self.inputs.shape[0]

    def validate_outputs(self):
        for i, y in enumerate(self.outputs):
            try:
                self.manifold.check_point(y)
            except ValueError as exc:
                raise ValueError(f"output {i}: {exc}") from None

    def subset(self, idx):
        idx = np.asarray(idx)
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.inputs[idx], self.outputs[idx], self.manifold, labels)


@dataclass(frozen=True, eq=False)
class PredictorModel:
    score_model: ScoreModel
    train_outputs: np.ndarray
    manifold: Manifold
    rgd: RgdConfig = field(default_factory=RgdConfig)

    @cached_property
    def prepared_outputs(self):
        return self.manifold.prepare(self.train_outputs)

    def to_dict(self):
        return {
            "version": MODEL_VERSION,
            "kind": "sp",
            "tag": self.manifold.to_dict(),
            "sigma": self.score_model.sigma,
            "lambda": self.score_model.lam,
            "rgd": self.rgd.to_dict(),
            "train_inputs": self.score_model.train_inputs.tolist(),
            "train_outputs": [self.manifold.point_to_json(y) for y in self.train_outputs],
        }

    @classmethod
    def from_dict(cls, d):
        if str(d.get("version")) != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        if d.get("kind", "sp") != "sp":
            raise ValueError(f"not a structured-prediction model: kind={d.get('kind')!r}")
        manifold = manifold_from_dict(d["tag"])
        outputs = np.stack([manifold.point_from_json(y) for y in d["train_outputs"]])
        data = Dataset(np.asarray(d["train_inputs"], dtype=float), outputs, manifold)
        return train(data, d["sigma"], d["lambda"], RgdConfig.from_dict(d["rgd"]))


def train(data: Dataset, sigma, lam, rgd: RgdConfig | None = None) -> PredictorModel:
    """Fit the score function. Output geometry plays no role here."""
    sm = fit_scores(data.inputs, sigma, lam)
    return PredictorModel(sm, data.outputs, data.manifold, rgd or RgdConfig())


def initial_point(model: PredictorModel, alpha):
    # np.argmax returns the first maximal index, so ties go to the lowest index
    return model.train_outputs[int(np.argmax(alpha))]


def predict(model: PredictorModel, x, rng=None, return_trace=False):
    """Minimize the score-weighted sum of squared geodesic distances for one query."""
    alpha = scores(model.score_model, np.asarray(x, dtype=float).reshape(-1))
    return _solve(model, alpha, rng, return_trace)


def _solve(model, alpha, rng, return_trace):
    y0 = initial_point(model, alpha)
    y, trace = minimize(model.manifold, model.prepared_outputs, alpha, y0, model.rgd, rng=rng, prepared=True)
    return (y, trace) if return_trace else y


def ordered_map(fn, items, executor=None):
    """``[fn(i) for i in items]``, optionally on an executor; order is preserved."""
    if executor is None:
        return [fn(i) for i in items]
    return list(executor.map(fn, items))


def _solve_seeded(model, item):
    alpha, seed = item
    return _solve(model, alpha, np.random.default_rng(seed), True)


def predict_batch(model: PredictorModel, xs, rng=None, return_traces=False, executor=None):
    """Predict every row of ``xs``.

    Each query gets its own retry seed drawn up front from ``rng``, so the
    result does not depend on evaluation order or on ``executor``.
    """
    alphas = scores(model.score_model, np.atleast_2d(np.asarray(xs, dtype=float)))
    seeds = rng.integers(0, 2**63, len(alphas)) if rng is not None else np.zeros(len(alphas), dtype=np.int64)
    results = ordered_map(partial(_solve_seeded, model), list(zip(alphas, seeds)), executor)
    preds = np.stack([y for y, _ in results]) if results else np.empty((0, *model.manifold.ambient_shape))
    traces = [tr for _, tr in results]
    return (preds, traces) if return_traces else preds


@dataclass(frozen=True)
class CvGrid:
    sigmas: tuple
    lambdas: tuple
    val_fraction: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        if not self.sigmas or not self.lambdas:
            raise ValueError("grid needs at least one sigma and one lambda")
        if min(self.sigmas) <= 0 or min(self.lambdas) <= 0:
            raise ValueError("grid values must be positive")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")

    @classmethod
    def logspaced(cls, sigma_range=(0.1, 1000.0), lambda_range=(1e-6, 1.0), num=7, val_fraction=0.2):
        return cls(
            tuple(np.geomspace(*sigma_range, num)),
            tuple(np.geomspace(*lambda_range, num)),
            val_fraction,
        )

    def cells(self):
        return [(s, l) for s in self.sigmas for l in self.lambdas]


def split_validation(data: Dataset, val_fraction, rng):
    n = len(data)
    n_val = int(round(n * val_fraction))
    if n_val < 1 or n_val >= n:
        raise ValueError(f"cannot split {n} samples with val_fraction={val_fraction}")
    perm = rng.permutation(n)
    return data.subset(np.sort(perm[n_val:])), data.subset(np.sort(perm[:n_val]))


def _call_cell(evaluate, cell):
    return evaluate(*cell)


def grid_search(grid: CvGrid, evaluate, executor=None):
    """Evaluate every (sigma, lambda) cell; pick the lowest loss.

    ``evaluate(sigma, lam)`` must be picklable when ``executor`` is a process
    pool. Ties go to the smaller lambda, then the smaller sigma.
    """
    cells = grid.cells()
    losses = ordered_map(partial(_call_cell, evaluate), cells, executor)
    table = [{"sigma": s, "lambda": l, "val_loss": float(v)} for (s, l), v in zip(cells, losses)]
    finite = [r for r in table if math.isfinite(r["val_loss"])]
    if not finite:
        raise ValueError("every grid cell produced a non-finite validation loss")
    best = min(finite, key=lambda r: (r["val_loss"], r["lambda"], r["sigma"]))
    return best["sigma"], best["lambda"], table


def validation_loss(data: Dataset, val: Dataset, rgd, seed, sigma, lam):
    """Mean geodesic loss on ``val`` of the predictor trained on ``data``."""
    model = train(data, sigma, lam, rgd)
    preds = predict_batch(model, val.inputs, rng=np.random.default_rng(seed))
    return float(np.mean([data.manifold.loss(p, t) for p, t in zip(preds, val.outputs)]))


def cross_validate(
    data: Dataset,
    grid: CvGrid,
    rgd: RgdConfig | None = None,
    rng=None,
    val: Dataset | None = None,
    executor=None,
):
    """Hold-out selection of (sigma, lambda) by mean geodesic loss.

    Uses ``val`` as the validation split when given, otherwise holds out
    ``grid.val_fraction`` of ``data`` at random. Cells run on ``executor``
    when one is given.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if val is None:
        data, val = split_validation(data, grid.val_fraction, rng)
    if len(data) == 0 or len(val) == 0:
        raise ValueError("empty train or validation split")
    seed = int(rng.integers(0, 2**63))
    return grid_search(grid, partial(validation_loss, data, val, rgd, seed), executor)
