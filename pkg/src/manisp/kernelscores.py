"""Gaussian-kernel ridge scores ``alpha(x) = (K + n lam I)^{-1} k_x``."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from manisp.errors import IllConditionedError


def _check_inputs(x, name="inputs"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite {name}")
    return x


def gaussian_kernel(x, x2, sigma):
    """``exp(-|x - x2|^2 / (2 sigma^2))``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = _check_inputs(x).reshape(-1)
    x2 = _check_inputs(x2).reshape(-1)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    d = x - x2
    return float(np.exp(-np.dot(d, d) / (2.0 * sigma**2)))


def gram(a, b, sigma):
    """Kernel matrix between the rows of ``a`` and the rows of ``b``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    a = np.atleast_2d(_check_inputs(a))
    b = np.atleast_2d(_check_inputs(b))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * sigma**2))


def _jitter_schedule(n):
    yield 0.0
    j = 1e-12 * n
    while j <= 1e-6 * n * (1 + 1e-9):
        yield j
        j *= 10.0


@dataclass(frozen=True, eq=False)
class ScoreModel:
    train_inputs: np.ndarray
    sigma: float
    lam: float
    factor: np.ndarray  # lower Cholesky factor of K + n lam I + jitter I
    jitter: float = 0.0

    @property
    def n(self):
        return self.train_inputs.shape[0]

    @property
    def system_matrix(self):
        return self.factor @ self.factor.T

    def solve(self, rhs):
        return cho_solve((self.factor, True), rhs)


def fit_scores(x_train, sigma, lam) -> ScoreModel:
    """Factorize ``K + n lam I``; escalates a diagonal jitter if Cholesky fails."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    x_train = np.atleast_2d(_check_inputs(x_train))
    n = x_train.shape[0]
    if n < 1:
        raise ValueError("need at least one training input")
    system = gram(x_train, x_train, sigma)
    system[np.diag_indices(n)] += n * lam
    jitter = 0.0
    for jitter in _jitter_schedule(n):
        a = system.copy()
        a[np.diag_indices(n)] += jitter
        try:
            c, _ = cho_factor(a, lower=True, check_finite=False)
        except LinAlgError:
            continue
        return ScoreModel(x_train, float(sigma), float(lam), np.tril(c), jitter)
    raise IllConditionedError(jitter)


def scores(model: ScoreModel, x):
    """Score vector(s) for one query ``(p,)`` or a batch ``(q, p)``."""
    x = _check_inputs(x)
    single = x.ndim == 1
    xq = np.atleast_2d(x)
    if xq.shape[1] != model.train_inputs.shape[1]:
        raise ValueError(f"expected {model.train_inputs.shape[1]} input features, got {xq.shape[1]}")
    kx = gram(model.train_inputs, xq, model.sigma)  # (n, q)
    alpha = model.solve(kx).T
    return alpha[0] if single else alpha
