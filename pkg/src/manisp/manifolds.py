"""Output manifolds: squared geodesic loss, Riemannian gradient, retraction.

Points and tangent vectors are plain numpy arrays in ambient coordinates:
``(d,)`` for Euclidean space, the sphere and the simplex, ``(m, m)``
symmetric for the SPD cone. Anchor sets (training outputs) are stacked along
a leading axis.

Every manifold exposes the same small surface used by the optimizer::

    prep = M.prepare(anchors)
    F = M.objective(y, prep, alpha)
    g = M.gradient(y, prep, alpha)      # Riemannian gradient, ambient coords
    y_new = M.retract(y, -eta * g)

``inner(y, u, v)`` is the Riemannian metric at ``y``; directional
derivatives satisfy ``dF(y)[v] == inner(y, gradient, v)``.
"""

import math

import numpy as np

from manisp import matfun
from manisp.errors import DegenerateStepError, SingularConfigurationError

CUT_GUARD = 1e-8
SINGULAR_TOL = 1e-12
SPHERE_TOL = 1e-10
SIMPLEX_SUM_TOL = 1e-10
DEFAULT_SIMPLEX_EPS = 1e-5


def _as_anchor_stack(anchors, point_ndim):
    a = np.asarray(anchors, dtype=float)
    if a.ndim == point_ndim:
        a = a[None]
    return a


def _check_alpha(alpha, n):
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.shape[0] != n:
        raise ValueError(f"got {alpha.shape[0]} weights for {n} anchors")
    return alpha


class Manifold:
    name = "abstract"
    point_ndim = 1

    def __init__(self, dim: int):
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        self.dim = dim

    def __repr__(self):
        return f"{type(self).__name__}({self.dim})"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(sorted(self.to_dict().items())))

    def to_dict(self):
        return {"name": self.name, "dim": self.dim}

    # shapes and serialization

    @property
    def ambient_shape(self):
        return (self.dim,)

    @property
    def ambient_size(self):
        return int(np.prod(self.ambient_shape))

    def flatten(self, y):
        return np.asarray(y, dtype=float).reshape(-1)

    def unflatten(self, flat):
        return np.asarray(flat, dtype=float).reshape(self.ambient_shape)

    def point_to_json(self, y):
        return [float(v) for v in np.asarray(y).reshape(-1)]

    def point_from_json(self, obj):
        y = np.asarray(obj, dtype=float)
        if y.shape != self.ambient_shape:
            raise ValueError(f"expected point of shape {self.ambient_shape}, got {y.shape}")
        return y

    # validity

    def check_point(self, y):
        """Raise ``ValueError`` unless ``y`` satisfies the point invariants."""
        y = np.asarray(y)
        if y.shape != self.ambient_shape:
            raise ValueError(f"expected shape {self.ambient_shape}, got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("point has non-finite coordinates")

    def is_point(self, y):
        try:
            self.check_point(y)
        except ValueError:
            return False
        return True

    # geometry

    def prepare(self, anchors):
        """Precompute per-anchor quantities reused across many evaluations."""
        return _as_anchor_stack(anchors, self.point_ndim)

    def losses(self, y, prep):
        raise NotImplementedError

    def loss(self, y, z):
        """Squared geodesic distance between ``y`` and ``z``."""
        return float(self.losses(y, self.prepare(z))[0])

    def objective(self, y, prep, alpha):
        return float(np.dot(alpha, self.losses(y, prep)))

    def weighted_objective(self, y, anchors, alpha):
        prep = self.prepare(anchors)
        alpha = _check_alpha(alpha, self._n_anchors(prep))
        return self.objective(y, prep, alpha)

    def gradient(self, y, prep, alpha):
        raise NotImplementedError

    def grad_weighted_objective(self, y, anchors, alpha):
        prep = self.prepare(anchors)
        alpha = _check_alpha(alpha, self._n_anchors(prep))
        return self.gradient(y, prep, alpha)

    def _n_anchors(self, prep):
        return len(prep)

    def inner(self, y, u, v):
        return float(np.sum(np.asarray(u) * np.asarray(v)))

    def norm(self, y, v):
        return math.sqrt(max(self.inner(y, v, v), 0.0))

    def to_tangent(self, y, v):
        return np.asarray(v, dtype=float)

    def retract(self, y, v):
        raise NotImplementedError

    def exp(self, y, v):
        """Closed-form exponential map, or ``None`` when not available."""
        return None

    def project(self, p):
        """Nearest-point style projection of ambient coordinates onto the manifold."""
        raise NotImplementedError

    def random_point(self, rng):
        raise NotImplementedError

    def random_tangent(self, y, rng):
        return self.to_tangent(y, rng.standard_normal(self.ambient_shape))


class Euclidean(Manifold):
    name = "euclidean"

    def losses(self, y, prep):
        diff = prep - np.asarray(y, dtype=float)
        return np.einsum("ij,ij->i", diff, diff)

    def gradient(self, y, prep, alpha):
        return 2.0 * (np.sum(alpha) * np.asarray(y, dtype=float) - alpha @ prep)

    def retract(self, y, v):
        return np.asarray(y, dtype=float) + v

    def exp(self, y, v):
        return self.retract(y, v)

    def project(self, p):
        p = np.asarray(p, dtype=float).reshape(self.ambient_shape)
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite coordinates")
        return p

    def random_point(self, rng):
        return rng.standard_normal(self.dim)


def sphere_angles(y, anchors):
    """Angles between ``y`` and each anchor, plus the tangent components.

    Returns ``(u, w, s, theta)`` with ``u = <z_i, y>``, ``w_i = (I - y y^T) z_i``,
    ``s = |w_i|`` and ``theta = atan2(s, u)``. The atan2 form equals the
    clamped ``arccos(u)`` for unit vectors and keeps full relative precision
    near zero angle.
    """
    u = anchors @ y
    w = anchors - u[:, None] * y
    s = np.sqrt(np.einsum("ij,ij->i", w, w))
    return u, w, s, np.arctan2(s, u)


def sphere_gradient(y, anchors, alpha, cut_guard=CUT_GUARD):
    u, w, s, theta = sphere_angles(y, anchors)
    active = alpha != 0
    bad = np.flatnonzero(active & (u < -1.0 + cut_guard))
    if bad.size:
        raise SingularConfigurationError(bad[0])
    # theta / sin(theta) -> 1 as the anchor approaches y; w_i -> 0 there as well
    ratio = np.ones_like(s)
    nz = s > SINGULAR_TOL
    ratio[nz] = theta[nz] / s[nz]
    coef = -2.0 * alpha * ratio
    coef[~nz] = 0.0
    g = coef @ w
    # remove the residual normal component left by rounding
    return g - np.dot(g, y) * y


class Sphere(Manifold):
    """Unit sphere in R^d with the great-circle distance."""

    name = "sphere"

    def check_point(self, y):
        super().check_point(y)
        r = np.linalg.norm(y)
        if abs(r - 1.0) > SPHERE_TOL:
            raise ValueError(f"sphere point has norm {r!r}")

    def losses(self, y, prep):
        return sphere_angles(np.asarray(y, dtype=float), prep)[3] ** 2

    def gradient(self, y, prep, alpha):
        return sphere_gradient(np.asarray(y, dtype=float), prep, alpha)

    def to_tangent(self, y, v):
        v = np.asarray(v, dtype=float)
        return v - np.dot(v, y) * y

    def retract(self, y, v):
        p = np.asarray(y, dtype=float) + v
        r = np.linalg.norm(p)
        if not np.isfinite(r) or r <= SINGULAR_TOL:
            raise DegenerateStepError("retraction through the origin")
        return p / r

    def exp(self, y, v):
        v = np.asarray(v, dtype=float)
        t = np.linalg.norm(v)
        if t == 0.0:
            return np.array(y, dtype=float)
        return math.cos(t) * np.asarray(y) + math.sin(t) * v / t

    def project(self, p):
        p = np.asarray(p, dtype=float).reshape(self.ambient_shape)
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite coordinates")
        r = np.linalg.norm(p)
        if r == 0.0:
            raise DegenerateStepError("cannot project the zero vector onto the sphere")
        return p / r

    def random_point(self, rng):
        return self.project(rng.standard_normal(self.dim))


class SPD(Manifold):
    """Symmetric positive-definite m x m matrices, affine-invariant metric."""

    name = "spd"
    point_ndim = 2

    @property
    def ambient_shape(self):
        return (self.dim, self.dim)

    def point_to_json(self, y):
        return {"dim": self.dim, "values": [float(v) for v in np.asarray(y).reshape(-1)]}

    def point_from_json(self, obj):
        if isinstance(obj, dict):
            if int(obj["dim"]) != self.dim:
                raise ValueError(f"expected {self.dim}x{self.dim} matrix, got dim {obj['dim']}")
            obj = obj["values"]
        return self.unflatten(obj)

    def check_point(self, y):
        super().check_point(y)
        y = np.asarray(y)
        if np.max(np.abs(y - y.T)) > 1e-12 * max(1.0, np.max(np.abs(y))):
            raise ValueError("SPD point is not symmetric")
        w = np.linalg.eigvalsh(y)
        try:
            matfun.check_floor(w)
        except matfun.NotPositiveDefiniteError as exc:
            raise ValueError(str(exc)) from None

    def prepare(self, anchors):
        anchors = _as_anchor_stack(anchors, 2)
        w_inv = matfun.inv_sqrtm(anchors)
        # eigenvalues of Z^-1/2 Y Z^-1/2 are at least lambda_min(Y) / lambda_max(Z),
        # so a feasible Y never falls below this per-anchor floor
        floor = matfun.EIGEN_FLOOR / np.linalg.eigvalsh(anchors)[..., -1:]
        return anchors, w_inv, floor

    def _n_anchors(self, prep):
        return len(prep[0])

    def losses(self, y, prep):
        # ||log(Y^-1/2 Z Y^-1/2)||_F^2 equals ||log(Z^-1/2 Y Z^-1/2)||_F^2
        _, w_inv, floor = prep
        m = w_inv @ matfun.symmetrize(y) @ w_inv
        ev = matfun.check_floor(matfun.sym_eigvals(m), floor)
        return np.sum(np.log(ev) ** 2, axis=-1)

    def gradient(self, y, prep, alpha):
        _, w_inv, floor = prep
        s = matfun.sqrtm(y)
        b = w_inv @ s
        m = np.swapaxes(b, -1, -2) @ b  # Y^1/2 Z^-1 Y^1/2
        logs = matfun.logm(m, floor)
        return matfun.symmetrize(2.0 * s @ np.tensordot(alpha, logs, axes=1) @ s)

    def inner(self, y, u, v):
        a = np.linalg.solve(y, u)
        b = np.linalg.solve(y, v)
        return float(np.sum(a * b.T))

    def to_tangent(self, y, v):
        return matfun.symmetrize(v)

    def retract(self, y, v):
        s, si = matfun.sqrt_and_inv_sqrt(y)
        e = matfun.expm(si @ matfun.symmetrize(v) @ si)
        out = matfun.symmetrize(s @ e @ s)
        if not np.all(np.isfinite(out)):
            raise DegenerateStepError("exponential map overflowed")
        w = np.linalg.eigvalsh(out)
        if w[0] < matfun.EIGEN_FLOOR:
            raise DegenerateStepError(f"step leaves the SPD cone (eigenvalue {w[0]:.3e})")
        return out

    def exp(self, y, v):
        return self.retract(y, v)

    def log(self, y, z):
        """Riemannian logarithm: the tangent at ``y`` pointing to ``z``."""
        s, si = matfun.sqrt_and_inv_sqrt(y)
        return matfun.symmetrize(s @ matfun.logm(si @ z @ si) @ s)

    def project(self, p):
        p = np.asarray(p, dtype=float).reshape(self.ambient_shape)
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite coordinates")
        return matfun.clamp_eigenvalues(p)

    def random_point(self, rng):
        q = matfun.haar_orthogonal(self.dim, rng)
        w = np.exp(rng.uniform(math.log(0.1), math.log(10.0), self.dim))
        return matfun.from_eig(w, q)

    def random_tangent(self, y, rng):
        s = matfun.sqrtm(y)
        return matfun.symmetrize(s @ matfun.symmetrize(rng.standard_normal(self.ambient_shape)) @ s)


class Simplex(Manifold):
    """Probability vectors with every entry >= eps, Fisher geometry.

    Handled through the square-root map onto the positive orthant of the unit
    sphere, where the distance is ``arccos(sum_i sqrt(y_i z_i))``. The metric
    is the pullback of the sphere metric, ``<u, v>_y = sum_i u_i v_i / (4 y_i)``.
    """

    name = "simplex"

    def __init__(self, dim: int, eps: float = DEFAULT_SIMPLEX_EPS):
        super().__init__(dim)
        eps = float(eps)
        if not 0.0 < eps < 1.0 / self.dim:
            raise ValueError(f"eps must lie in (0, 1/m), got {eps}")
        self.eps = eps

    def __repr__(self):
        return f"Simplex({self.dim}, eps={self.eps!r})"

    def to_dict(self):
        return {"name": self.name, "dim": self.dim, "eps": self.eps}

    def check_point(self, y):
        super().check_point(y)
        total = float(np.sum(y))
        if abs(total - 1.0) > SIMPLEX_SUM_TOL:
            raise ValueError(f"simplex point sums to {total!r}")
        lo = float(np.min(y))
        if lo < self.eps * (1.0 - 1e-9):
            raise ValueError(f"simplex entry {lo!r} below eps={self.eps}")

    def prepare(self, anchors):
        return to_sphere(_as_anchor_stack(anchors, 1))

    def losses(self, y, prep):
        return sphere_angles(to_sphere(y), prep)[3] ** 2

    def gradient(self, y, prep, alpha):
        s = to_sphere(y)
        g = sphere_gradient(s, prep, alpha)
        # pull back through d(pi)(v) = v / (2 sqrt(y))
        out = 2.0 * s * g
        return out - np.mean(out)

    def inner(self, y, u, v):
        return float(np.sum(np.asarray(u) * np.asarray(v) / (4.0 * np.asarray(y))))

    def to_tangent(self, y, v):
        v = np.asarray(v, dtype=float)
        return v - np.mean(v)

    def retract(self, y, v):
        s = to_sphere(y)
        w = np.asarray(v, dtype=float) / (2.0 * s)
        w = w - np.dot(w, s) * s
        p = s + w
        r = np.linalg.norm(p)
        if not np.isfinite(r) or r <= SINGULAR_TOL:
            raise DegenerateStepError("retraction through the origin")
        return self.project((p / r) ** 2)

    def project(self, p):
        p = np.asarray(p, dtype=float).reshape(self.ambient_shape)
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite coordinates")
        q = np.maximum(p, self.eps) - self.eps
        total = q.sum()
        if total <= 0.0:
            return np.full(self.dim, 1.0 / self.dim)
        # affine rescale keeps every entry >= eps and fixes valid points
        return self.eps + (1.0 - self.dim * self.eps) * (q / total)

    def random_point(self, rng):
        return self.project(rng.dirichlet(np.ones(self.dim)))

    def random_tangent(self, y, rng):
        g = y * rng.standard_normal(self.dim)
        return g - y * g.sum()


def to_sphere(y):
    """Square-root map from the simplex onto the positive orthant of the sphere."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("simplex point has negative entries")
    return np.sqrt(y)


def from_sphere(s):
    """Inverse of :func:`to_sphere` on the open positive orthant."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("sphere point outside the open positive orthant")
    return s**2


_REGISTRY = {cls.name: cls for cls in (Euclidean, Sphere, SPD, Simplex)}


def manifold_from_dict(d):
    d = dict(d)
    try:
        cls = _REGISTRY[d.pop("name")]
    except KeyError as exc:
        raise ValueError(f"unknown manifold {exc.args[0]!r}") from None
    return cls(**d)


def make_manifold(name, dim, eps=None):
    d = {"name": name, "dim": dim}
    if name == "simplex" and eps is not None:
        d["eps"] = eps
    return manifold_from_dict(d)
