"""Riemannian gradient descent with Armijo backtracking."""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from manisp.errors import DegenerateStepError, NotPositiveDefiniteError, SingularConfigurationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RgdConfig:
    max_iters: int = 500
    grad_tol: float = 1e-8
    init_step: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    warm_start: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")
        if not self.init_step > 0:
            raise ValueError("init_step must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class RgdTrace:
    iterations_run: int = 0
    final_grad_norm: float = float("nan")
    objective_history: list = field(default_factory=list)
    converged: bool = False
    retried: bool = False
    stop_reason: str = ""

    def summary(self):
        return {
            "iterations_run": self.iterations_run,
            "final_grad_norm": self.final_grad_norm,
            "initial_objective": self.objective_history[0] if self.objective_history else None,
            "final_objective": self.objective_history[-1] if self.objective_history else None,
            "converged": self.converged,
            "retried": self.retried,
            "stop_reason": self.stop_reason,
        }


_MAX_STEP_GROWTH = 1e6
_REJECT = (DegenerateStepError, NotPositiveDefiniteError, FloatingPointError)


def _next_trial_step(eta, gn2, f, f_new, cfg):
    # minimizer of the quadratic through f, slope -gn2 and f_new at eta
    curv = f_new - f + eta * gn2
    if curv > 0:
        step = eta * eta * gn2 / (2.0 * curv)
        step = min(max(step, 0.1 * eta), 10.0 * eta)
    else:
        step = eta / cfg.backtrack_factor
    return min(step, _MAX_STEP_GROWTH * cfg.init_step)


def _descend(manifold, prep, alpha, y, cfg):
    trace = RgdTrace(stop_reason="max_iters")
    f = manifold.objective(y, prep, alpha)
    trace.objective_history.append(f)
    # decreases below this are indistinguishable from rounding in F
    f_floor = 16 * np.finfo(float).eps * max(abs(manifold.objective(y, prep, np.abs(alpha))), abs(f))
    eta_start = cfg.init_step
    for it in range(cfg.max_iters):
        try:
            g = manifold.gradient(y, prep, alpha)
            gn2 = manifold.inner(y, g, g)
            if not np.isfinite(gn2):
                raise FloatingPointError("non-finite gradient")
        except SingularConfigurationError:
            if it == 0:
                raise
            # a descent step landed on the cut locus of a negatively weighted
            # anchor; y is feasible and strictly better than the start
            trace.stop_reason = "singular"
            break
        except (np.linalg.LinAlgError, FloatingPointError, NotPositiveDefiniteError):
            if it == 0:
                raise
            trace.stop_reason = "degenerate"
            break
        trace.final_grad_norm = float(np.sqrt(max(gn2, 0.0)))
        if trace.final_grad_norm <= cfg.grad_tol:
            trace.converged = True
            trace.stop_reason = "grad_tol"
            break
        eta = eta_start
        for _ in range(cfg.max_backtracks):
            try:
                y_new = manifold.retract(y, -eta * g)
                f_new = manifold.objective(y_new, prep, alpha)
            except _REJECT:
                f_new = np.inf
            if np.isfinite(f_new) and f_new <= f - cfg.armijo_c * eta * gn2:
                break
            eta *= cfg.backtrack_factor
            if eta * gn2 < f_floor:
                trace.stop_reason = "line_search"
                return y, trace
        else:
            # no acceptable step, typically because F is flat to rounding: keep y
            trace.stop_reason = "line_search"
            break
        if cfg.warm_start:
            eta_start = _next_trial_step(eta, gn2, f, f_new, cfg)
        y, f = y_new, f_new
        trace.iterations_run += 1
        trace.objective_history.append(f)
    return y, trace


def minimize(manifold, anchors, alpha, y0, cfg: RgdConfig | None = None, rng=None, prepared=False):
    """Minimize ``F(y) = sum_i alpha_i * loss(y, anchors_i)`` from ``y0``.

    Steps along the negative Riemannian gradient; each step length starts at
    ``cfg.init_step`` and is halved until the Armijo condition holds. If the
    gradient hits a singular configuration, the search restarts once from a
    small random perturbation of ``y0`` drawn from ``rng``.

    Pass ``prepared=True`` when ``anchors`` already came from
    ``manifold.prepare``.

    Returns ``(y, trace)``.
    """
    cfg = cfg or RgdConfig()
    prep = anchors if prepared else manifold.prepare(anchors)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    y0 = np.array(y0, dtype=float)
    try:
        return _descend(manifold, prep, alpha, y0, cfg)
    except SingularConfigurationError as exc:
        log.debug("singular configuration (%s); retrying from a perturbed start", exc)
        rng = rng if rng is not None else np.random.default_rng(0)
        v = manifold.random_tangent(y0, rng)
        v = v / max(manifold.norm(y0, v), np.finfo(float).tiny)
        y_start = manifold.retract(y0, 1e-3 * v)
        y, trace = _descend(manifold, prep, alpha, y_start, cfg)
        trace.retried = True
        f0 = manifold.objective(y0, prep, alpha)
        if trace.objective_history[-1] > f0:
            trace.objective_history.append(f0)
            return y0, trace
        return y, trace
