"""KRLS baseline: independent kernel ridge regression on every flattened
output coordinate, then projection onto the manifold."""

from dataclasses import dataclass

import numpy as np

from manisp.estimator import MODEL_VERSION, CvGrid, Dataset, grid_search, split_validation
from manisp.kernelscores import ScoreModel, fit_scores, gram
from manisp.manifolds import Manifold, manifold_from_dict


@dataclass(frozen=True, eq=False)
class KrlsModel:
    score_model: ScoreModel
    weights: np.ndarray  # (n, D), row-major flattened outputs
    manifold: Manifold
    train_outputs: np.ndarray

    def to_dict(self):
        return {
            "version": MODEL_VERSION,
            "kind": "krls",
            "tag": self.manifold.to_dict(),
            "sigma": self.score_model.sigma,
            "lambda": self.score_model.lam,
            "train_inputs": self.score_model.train_inputs.tolist(),
            "train_outputs": [self.manifold.point_to_json(y) for y in self.train_outputs],
        }

    @classmethod
    def from_dict(cls, d):
        if str(d.get("version")) != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        if d.get("kind") != "krls":
            raise ValueError(f"not a KRLS model: kind={d.get('kind')!r}")
        manifold = manifold_from_dict(d["tag"])
        outputs = np.stack([manifold.point_from_json(y) for y in d["train_outputs"]])
        data = Dataset(np.asarray(d["train_inputs"], dtype=float), outputs, manifold)
        return krls_train(data, d["sigma"], d["lambda"])


def flatten_outputs(manifold, outputs):
    return np.asarray(outputs, dtype=float).reshape(len(outputs), manifold.ambient_size)


def krls_train(data: Dataset, sigma, lam) -> KrlsModel:
    sm = fit_scores(data.inputs, sigma, lam)
    w = sm.solve(flatten_outputs(data.manifold, data.outputs))
    return KrlsModel(sm, w, data.manifold, data.outputs)


def krls_predict_ambient(model: KrlsModel, x):
    """Unprojected prediction(s) ``W^T k_x`` reshaped to ambient shape."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    kx = gram(np.atleast_2d(x), model.score_model.train_inputs, model.score_model.sigma)
    flat = kx @ model.weights
    out = flat.reshape(len(flat), *model.manifold.ambient_shape)
    return out[0] if single else out


def krls_predict(model: KrlsModel, x):
    """Projected prediction for one query ``(p,)`` or a batch ``(q, p)``."""
    x = np.asarray(x, dtype=float)
    amb = krls_predict_ambient(model, x)
    if x.ndim == 1:
        return model.manifold.project(amb)
    return np.stack([model.manifold.project(a) for a in amb])


def krls_cross_validate(data: Dataset, grid: CvGrid, rng=None, val: Dataset | None = None):
    """Select (sigma, lambda) by mean squared ambient error of the raw predictions."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if val is None:
        data, val = split_validation(data, grid.val_fraction, rng)
    target = flatten_outputs(val.manifold, val.outputs)

    def evaluate(sigma, lam):
        model = krls_train(data, sigma, lam)
        pred = krls_predict_ambient(model, val.inputs).reshape(len(val), -1)
        return np.mean(np.sum((pred - target) ** 2, axis=1))

    return grid_search(grid, evaluate)
