"""Discrete L_p chord Minkowski problem for p < 0.

The solver maximizes

    Psi(h) = min_xi Phi_p(h, xi),  Phi_p(h, xi) = -(1/p) sum_i alpha_i (h_i - xi . v_i)^p

over support vectors with ``I_q(P_h) = 1``. The inner minimization is a
strictly convex problem solved by damped Newton; the outer problem uses
projected gradient ascent with Armijo backtracking and exact renormalization
by homogeneity. At a stationary point ``F_{p,q}(P, .)`` is proportional to the
target measure and a final dilation ``Q = cP`` solves ``F_{p,q}(Q, .) = mu``.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._config import TOL
from .chord import (
    chord_integral,
    chord_measure,
    chord_terms,
    default_scheme,
    lp_chord_measure,
)
from .measure import DiscreteMeasure, MeasureError, validate_general_position
from .polytope import PolytopeError, wulff_shape
from .quadrature import QuadratureScheme
from .utils import chebyshev_center, check_point

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when the inner problem cannot be solved."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of :func:`outer_solve`.

    Parameters
    ----------
    p : float
        Negative exponent.
    q : float
        Chord exponent, ``q >= 1``.
    inner_tol : float
        Newton stops when the gradient norm is below ``inner_tol`` times the
        size of the gradient terms ``sum_i alpha_i d_i^(p-1)``.
    outer_tol : float
        Iteration stops once the stationarity residual drops below this.
    residual_tol : float
        A run counts as converged when the final per-atom residual is below
        this value.
    max_outer, max_inner : int
    armijo_c1, backtrack : float
    max_backtracks : int
    radius_safeguard : float
        Abort when the outer radius exceeds this multiple of the initial one.
    gradient_check : bool
        Finite-difference check of ``F_q`` at the final iterate.
    preconditioner : {"bfgs", "diagonal", "none"}
        Metric for the projected gradient. ``"none"`` is the plain
        Euclidean projection; ``"diagonal"`` uses the inverse diagonal of
        the Hessian of Phi_p in h, ``h_i^(2-p) / ((1-p) alpha_i)``;
        ``"bfgs"`` starts from that metric and refines it with secant
        updates of the Lagrangian.
    scheme : QuadratureScheme, optional
        Defaults to :func:`chordmink.chord.default_scheme` for the dimension.
    seed : int
    """

    p: float
    q: float
    inner_tol: float = 1e-12
    outer_tol: float = 1e-6
    residual_tol: float = 1e-2
    max_outer: int = 500
    max_inner: int = 50
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    radius_safeguard: float = 1e6
    gradient_check: bool = True
    preconditioner: str = "bfgs"
    scheme: Optional[QuadratureScheme] = None
    seed: int = 0

    def __post_init__(self):
        if not self.p < 0:
            raise ValueError("p must be negative")
        if not self.q >= 1:
            raise ValueError("q must be >= 1")
        for name in ("inner_tol", "outer_tol", "residual_tol", "armijo_c1", "radius_safeguard"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.preconditioner not in ("bfgs", "diagonal", "none"):
            raise ValueError("preconditioner must be 'bfgs', 'diagonal' or 'none'")
        if min(self.max_outer, self.max_inner, self.max_backtracks) < 1:
            raise ValueError("iteration caps must be positive")

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "scheme"}
        d["scheme"] = None if self.scheme is None else self.scheme.to_dict()
        return d


@dataclass
class CenterSolution:
    xi: np.ndarray
    grad_norm: float
    objective: float
    hessian_min_eig: float
    n_iter: int
    min_hessian_eig_path: float


@dataclass
class SolveReport:
    polytope: object
    support_trace: list
    residual: np.ndarray
    scaling_c: float
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)
    message: str = ""

    @property
    def max_residual(self):
        return float(np.max(self.residual))

    def to_dict(self):
        return {
            "polytope": self.polytope.to_dict() if self.polytope is not None else None,
            "support_trace": self.support_trace,
            "residual": [float(r) for r in self.residual],
            "max_residual": self.max_residual if len(self.residual) else None,
            "scaling_c": float(self.scaling_c),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "diagnostics": self.diagnostics,
            "message": self.message,
        }


def _args(h, xi, v):
    return np.asarray(h, dtype=float) - v @ xi


def phi(h, xi, m, p):
    """``Phi_p(h, xi) = -(1/p) sum_i alpha_i (h_i - xi . v_i)^p``."""
    if not p < 0:
        raise ValueError("p must be negative")
    xi = check_point(xi, m.dim)
    d = _args(h, xi, m.normals)
    if np.any(d <= 0):
        raise ValueError("nonpositive argument: xi is not interior to the shifted constraints")
    return float(-np.dot(m.weights, d**p) / p)


def _phi_grad_hess(d, v, alpha, p):
    dp = d ** (p - 1)
    val = -np.dot(alpha, dp * d) / p
    grad = (alpha * dp) @ v
    H = (1.0 - p) * (v.T * (alpha * dp / d)) @ v
    return val, grad, H


def inner_center(h, m, p, cfg=None, *, start=None):
    """Minimize ``Phi_p(h, .)`` over the interior of the Wulff shape of ``h``.

    Damped Newton from the Chebyshev center (or ``start``), with
    backtracking that keeps every ``h_i - xi . v_i`` positive.

    Returns
    -------
    CenterSolution

    Raises
    ------
    SolverError
        If the iteration cap is hit or the Hessian is numerically singular.
    """
    if not p < 0:
        raise ValueError("p must be negative")
    tol = cfg.inner_tol if cfg is not None else 1e-12
    max_inner = cfg.max_inner if cfg is not None else 50
    v, alpha = m.normals, m.weights
    h = np.asarray(h, dtype=float)
    if start is None:
        xi, r = chebyshev_center(v, h)
        if not (math.isfinite(r) and r > 0):
            raise SolverError("Wulff shape of h has empty interior or is unbounded")
    else:
        xi = check_point(start, m.dim).copy()
    d = _args(h, xi, v)
    if np.any(d <= 0):
        raise SolverError("starting point is not interior")
    val, grad, H = _phi_grad_hess(d, v, alpha, p)
    min_eig_path = math.inf
    for it in range(max_inner + 1):
        eig_min = float(np.linalg.eigvalsh(H)[0])
        min_eig_path = min(min_eig_path, eig_min)
        gnorm = float(np.linalg.norm(grad))
        scale = float(np.dot(alpha, d ** (p - 1)))
        if gnorm <= tol * scale:
            return CenterSolution(xi, gnorm, val, eig_min, it, min_eig_path)
        if it == max_inner:
            break
        if not eig_min > 1e-14 * np.abs(H).max():
            raise SolverError("Hessian is numerically singular; check general position")
        step = np.linalg.solve(H, grad)
        decrement = float(grad @ step)
        t = 1.0
        for _ in range(60):
            xi_new = xi - t * step
            d_new = _args(h, xi_new, v)
            if np.all(d_new > 0):
                # inside the quadratic-convergence region the decrease is
                # below roundoff of val, so take full steps there
                if decrement <= 1e-8 * abs(val):
                    break
                val_new = -np.dot(alpha, d_new**p) / p
                if val_new <= val - 0.25 * t * decrement:
                    break
            t *= 0.5
        else:
            # no representable decrease left: accept if at roundoff level
            if gnorm <= 1e3 * np.finfo(float).eps * scale:
                return CenterSolution(xi, gnorm, val, eig_min, it, min_eig_path)
            raise SolverError("inner line search failed")
        xi, d = xi_new, d_new
        val, grad, H = _phi_grad_hess(d, v, alpha, p)
    raise SolverError(f"inner Newton did not converge in {max_inner} iterations "
                      f"(gradient norm {gnorm:.3g})")


def chord_gradient_check(P, q, scheme=None, step=None):
    """Largest relative gap between central differences of ``I_q`` and ``F_q``.

    Each active support value is perturbed by ``+-step`` (default
    ``1e-4`` times the inner radius). Deviations are taken relative to
    ``max(|F_i|, 1e-3 max|F|)``; inactive coordinates are compared against
    zero on the same scale.

    Returns
    -------
    dict with ``max_deviation``, ``fd`` and ``analytic``.
    """
    scheme = scheme or default_scheme(P)
    step = 1e-4 * P.inner_radius if step is None else float(step)
    h = P.support_values
    F = chord_measure(P, q, scheme).values
    fd = np.zeros_like(F)
    for i in range(P.n_facets):
        e = np.zeros_like(h)
        e[i] = step
        plus = chord_integral(wulff_shape(P.normals, h + e), q, scheme)
        minus = chord_integral(wulff_shape(P.normals, h - e), q, scheme)
        fd[i] = (plus - minus) / (2 * step)
    floor = 1e-3 * np.abs(F).max()
    dev = np.abs(fd - F) / np.maximum(np.abs(F), floor)
    return {"max_deviation": float(dev.max()), "fd": fd.tolist(), "analytic": F.tolist(),
            "step": step}


def _lp_weights(h, p):
    return np.abs(h) ** (1.0 - p)


def _stationarity(F, h, alpha, p, phi_val, n, q):
    """Residual of ``F_{p,q} = alpha / kappa`` with ``kappa = (-p) Phi / (n+q-1)``."""
    kappa = (-p) * phi_val / (n + q - 1)
    target = alpha / kappa
    Fpq = _lp_weights(h, p) * F
    return float(np.max(np.abs(Fpq - target) / target)), kappa


def _bfgs_update(B, s, new_state, g_old, F_old, mult, alpha, p):
    """Inverse BFGS update for the negated Lagrangian; skipped without curvature."""
    g_new = -alpha * new_state.h ** (p - 1)
    # gradient of -L with a common multiplier, as in SQP
    y = (g_old - mult * F_old) - (g_new - mult * new_state.F)
    sy = float(s @ y)
    if not sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
        return B
    rho = 1.0 / sy
    V = np.eye(len(s)) - rho * np.outer(s, y)
    return V @ B @ V.T + rho * np.outer(s, s)


class _State:
    """One outer iterate, recentered so that the inner minimizer is the origin."""

    def __init__(self, P, center, I_val, I_err, F, F_err):
        self.P = P
        self.h = P.support_values
        self.center = center
        self.I = I_val
        self.I_err = I_err
        self.F = F
        self.F_err = F_err

    @property
    def phi(self):
        return self.center.objective


def _build_state(h, m, cfg, scheme):
    """Wulff shape of ``h``, recentered at its inner minimizer and scaled to ``I_q = 1``.

    Returns ``None`` if a facet is missing or the geometry breaks down.
    """
    n, p, q = m.dim, cfg.p, cfg.q
    if np.any(h <= 0):
        return None
    try:
        P = wulff_shape(m.normals, h)
        if not np.all(P.active):
            return None
        # with every facet present the offsets are the true support values
        # h > 0 keeps the origin interior, a valid Newton start
        center = inner_center(P.support_values, m, p, cfg, start=np.zeros(n))
        # translation leaves Phi_p at the minimizer unchanged
        P = wulff_shape(m.normals, P.support_values - m.normals @ center.xi)
        if not np.all(P.active):
            return None
        I_val, I_err, F, F_err = chord_terms(P, q, scheme)
        lam = I_val ** (-1.0 / (n + q - 1))
        P = wulff_shape(m.normals, lam * P.support)
        if not np.all(P.active):
            return None
        center = inner_center(P.support, m, p, cfg, start=np.zeros(n))
    except (PolytopeError, SolverError):
        return None
    # homogeneity: I_q has degree n+q-1 and F_q degree n+q-2
    f_scale = lam ** (n + q - 2)
    return _State(P, center, 1.0, I_err * lam ** (n + q - 1), F * f_scale, F_err * f_scale)


def _ascent_direction(B, g, F):
    """``B (g - mult F)`` with ``mult`` chosen so the direction is tangent, i.e. ``F . d = 0``."""
    BF = B @ F
    mult = (g @ BF) / (F @ BF)
    direction = B @ (g - mult * F)
    return direction, mult, float(g @ direction)


def _line_search(state, direction, slope, t, m, cfg, scheme):
    for _ in range(cfg.max_backtracks):
        new = _build_state(state.h + t * direction, m, cfg, scheme)
        if new is not None and new.phi >= state.phi + cfg.armijo_c1 * t * slope:
            return new, t
        t *= cfg.backtrack
    return None, t


def outer_solve(m, cfg, *, check_general_position=True):
    """Solve ``F_{p,q}(Q, .) = mu`` for a discrete measure ``mu = m``.

    Parameters
    ----------
    m : DiscreteMeasure
    cfg : SolverConfig
    check_general_position : bool
        Reject measures that fail :func:`validate_general_position`.

    Returns
    -------
    SolveReport
        ``converged`` is True iff the final per-atom residual is at most
        ``cfg.residual_tol``.
    """
    if not isinstance(m, DiscreteMeasure):
        raise TypeError("m must be a DiscreteMeasure")
    if check_general_position:
        gp = validate_general_position(m, seed=cfg.seed)
        if not gp.in_general_position:
            raise MeasureError("measure is not in general position")
    n, p, q = m.dim, cfg.p, cfg.q
    scheme = cfg.scheme or default_scheme(n)
    alpha = m.weights

    # constant support, scaled by homogeneity so that I_q = 1
    state = _build_state(np.ones(m.n_atoms), m, cfg, scheme)
    if state is None:
        raise SolverError("initial Wulff shape is degenerate")
    R0 = state.P.outer_radius

    def diagonal_metric(h):
        # inverse of the diagonal of d^2 Phi / dh^2
        return np.diag(h ** (2.0 - p) / (alpha * (1.0 - p)))

    trace = []
    best, best_rho = state, math.inf
    message = "iteration cap reached"
    t_prev = None
    B = None
    it = 0
    for it in range(cfg.max_outer + 1):
        h, F = state.h, state.F
        rho, _ = _stationarity(F, h, alpha, p, state.phi, n, q)
        if rho < best_rho:
            best, best_rho = state, rho
        g = -alpha * h ** (p - 1)
        fresh = cfg.preconditioner != "bfgs" or B is None
        if cfg.preconditioner == "none":
            B = np.eye(len(h))
        elif fresh:
            B = diagonal_metric(h)
        direction, mult, slope = _ascent_direction(B, g, F)
        if not slope > 0 and not fresh:
            fresh, B = True, diagonal_metric(h)
            direction, mult, slope = _ascent_direction(B, g, F)
        trace.append({"iteration": it, "objective": state.phi, "residual": rho,
                      "chord_integral": state.I, "slope": slope})
        logger.debug("outer %d: Phi=%.12g residual=%.3e", it, state.phi, rho)
        if rho <= cfg.outer_tol:
            message = "stationarity residual below outer_tol"
            break
        if state.P.outer_radius > cfg.radius_safeguard * R0:
            message = "outer radius safeguard triggered"
            break
        if it == cfg.max_outer:
            break
        if not slope > 0:
            message = "no ascent direction left"
            break

        # largest step keeping h positive, then Armijo backtracking
        def first_step(direction):
            neg = direction < 0
            t_pos = float(np.min(-h[neg] / direction[neg])) if np.any(neg) else math.inf
            if cfg.preconditioner == "bfgs":
                # trial steps change no support value by more than a quarter
                t_rel = 0.25 / float(np.max(np.abs(direction) / h))
                return min(1.0, 0.5 * t_pos, t_rel)
            t0 = t_prev if t_prev is not None else 0.1 * float(
                np.min(h / np.maximum(np.abs(direction), 1e-300)))
            return min(2.0 * t0, 0.5 * t_pos)

        new_state, t = _line_search(state, direction, slope, first_step(direction), m, cfg, scheme)
        if new_state is None and not fresh:
            # secant information is unreliable where facets nearly vanish
            B = diagonal_metric(h)
            direction, mult, slope = _ascent_direction(B, g, F)
            new_state, t = _line_search(state, direction, slope, first_step(direction),
                                        m, cfg, scheme)
        if new_state is None:
            message = "line search failed"
            break
        t_prev = t
        logger.debug("accepted step %.3g", t)
        if cfg.preconditioner == "bfgs":
            B = _bfgs_update(B, new_state.h - h, new_state, g, F, mult, alpha, p)
        state = new_state

    # final dilation Q = cP
    P = best.P
    h = best.h
    if best is not state:
        message += "; reporting the iterate with the smallest residual"
    rho, kappa = _stationarity(best.F, h, alpha, p, best.phi, n, q)
    c = kappa ** (1.0 / (n + q - p - 1))
    Q = wulff_shape(m.normals, c * P.support)
    Fpq = chord_measure(Q, q, scheme)
    w = _lp_weights(Q.support_values, p)
    resid = np.abs(w * Fpq.values - alpha) / alpha
    converged = bool(resid.max() <= cfg.residual_tol)
    if message == "iteration cap reached" and converged:
        message = "iteration cap reached with residual below residual_tol"
    diagnostics = {
        "stationarity_residual": rho,
        "kappa": kappa,
        "initial_outer_radius": R0,
        "min_support_over_radius": float(Q.support_values.min() / Q.outer_radius),
        "hessian_min_eig": best.center.hessian_min_eig,
        "inner_grad_norm": best.center.grad_norm,
        "chord_integral_error": best.I_err,
        "chord_measure_error": float((w * Fpq.estimated_error / alpha).max()),
    }
    if cfg.gradient_check:
        chk = chord_gradient_check(P, q, scheme)
        diagnostics["gradient_check"] = chk["max_deviation"]
    return SolveReport(
        polytope=Q,
        support_trace=trace,
        residual=resid,
        scaling_c=c,
        iterations=it,
        converged=converged,
        diagnostics=diagnostics,
        message=message,
    )


def _match_normals(P, m):
    """Index into ``P.normals`` for every atom of ``m``."""
    # angle ~ chord length for small angles
    d = np.linalg.norm(m.normals[:, None, :] - P.normals[None, :, :], axis=-1)
    idx = np.argmin(d, axis=1)
    bad = np.flatnonzero(d[np.arange(len(idx)), idx] > TOL.duplicate_angle)
    if len(bad):
        raise PolytopeError(f"atom {int(bad[0])} has no matching normal in the polytope")
    return idx


def verify(P, m, p, q, scheme=None):
    """Per-atom residuals ``|F_{p,q}(P, v_i) - alpha_i| / alpha_i``.

    Returns
    -------
    residual : ndarray (N,)
    summary : dict
        ``max``, ``mean`` and ``max_error_bar`` (quadrature error relative to
        the weights).
    """
    idx = _match_normals(P, m)
    Fpq = lp_chord_measure(P, p, q, scheme)
    vals = Fpq.values[idx]
    err = Fpq.estimated_error[idx]
    r = np.abs(vals - m.weights) / m.weights
    summary = {
        "max": float(r.max()),
        "mean": float(r.mean()),
        "max_error_bar": float((err / m.weights).max()),
    }
    return r, summary
