"""Spectral functions of symmetric matrices.

All functions accept a single ``(m, m)`` matrix or a stack ``(..., m, m)``
and broadcast over the leading axes.
"""

from typing import NamedTuple

import numpy as np

from manisp.errors import EigenSolverError, NotPositiveDefiniteError

EIGEN_FLOOR = 1e-12

# eigenvalues within this many ulps (relative to the spectral radius) of the
# floor are treated as sitting on it
_FLOOR_ULPS = 64


class EigPair(NamedTuple):
    eigvals: np.ndarray  # descending
    eigvecs: np.ndarray  # columns are eigenvectors


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def sym_eig(a) -> EigPair:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending."""
    a = symmetrize(a)
    if not np.all(np.isfinite(a)):
        raise EigenSolverError("non-finite entries in symmetric eigenproblem")
    try:
        w, q = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    return EigPair(w[..., ::-1], q[..., ::-1])


def sym_eigvals(a):
    """Eigenvalues only, ascending."""
    a = symmetrize(a)
    if not np.all(np.isfinite(a)):
        raise EigenSolverError("non-finite entries in symmetric eigenproblem")
    try:
        return np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc


def _floor_tol(w):
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    return _FLOOR_ULPS * np.finfo(float).eps * scale


def check_floor(w, floor=EIGEN_FLOOR):
    """Raise if any eigenvalue is below ``floor`` beyond rounding; return clamped values."""
    bad = w < floor - _floor_tol(w)
    if np.any(bad):
        raise NotPositiveDefiniteError(np.min(w[bad]))
    return np.maximum(w, floor)


_FUNCS = {
    "sqrt": np.sqrt,
    "inv_sqrt": lambda w: 1.0 / np.sqrt(w),
    "log": np.log,
    "exp": np.exp,
}


def from_eig(w, q):
    """Reassemble ``Q diag(w) Q^T``."""
    return symmetrize((q * w[..., None, :]) @ np.swapaxes(q, -1, -2))


def spd_fn(a, f: str, floor=EIGEN_FLOOR):
    """Apply the scalar function ``f`` to the eigenvalues of ``a``.

    ``f`` is one of ``"sqrt"``, ``"inv_sqrt"``, ``"log"`` or ``"exp"``. All but
    ``exp`` require every eigenvalue of ``a`` to be at least ``floor`` (up to
    rounding). ``floor`` may be an array broadcasting against the batch, shape
    ``(..., 1)``.
    """
    try:
        func = _FUNCS[f]
    except KeyError:
        raise ValueError(f"unknown spectral function {f!r}") from None
    w, q = sym_eig(a)
    if f != "exp":
        w = check_floor(w, floor)
    return from_eig(func(w), q)


def sqrtm(a):
    return spd_fn(a, "sqrt")


def inv_sqrtm(a):
    return spd_fn(a, "inv_sqrt")


def logm(a, floor=EIGEN_FLOOR):
    return spd_fn(a, "log", floor)


def expm(a):
    return spd_fn(a, "exp")


def sqrt_and_inv_sqrt(a):
    """Both ``a^{1/2}`` and ``a^{-1/2}`` from a single decomposition."""
    w, q = sym_eig(a)
    w = check_floor(w)
    s = np.sqrt(w)
    return from_eig(s, q), from_eig(1.0 / s, q)


def clamp_eigenvalues(a, floor=EIGEN_FLOOR):
    """Raise every eigenvalue below ``floor`` up to ``floor``."""
    w, q = sym_eig(a)
    if np.all(w >= floor):
        return symmetrize(a)
    return from_eig(np.maximum(w, floor), q)


def haar_orthogonal(m: int, rng):
    """Draw an m x m orthogonal matrix from the Haar measure.

    QR of a Gaussian matrix, with the signs of R's diagonal folded into Q so
    the result does not depend on the QR sign convention.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d
