"""Estimator interface to the L_p chord Minkowski solver."""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .measure import DiscreteMeasure
from .polytope import PolytopeError
from .quadrature import QuadratureScheme
from .solver import SolverConfig, outer_solve, verify


class LpChordMinkowskiSolver(BaseEstimator):
    """Fit a polytope whose L_p chord measure matches a discrete measure.

    ``fit(X, sample_weight=alpha)`` reads the rows of ``X`` as the atoms
    ``v_i`` and ``alpha`` as their masses.

    Parameters
    ----------
    p : float, default=-1.0
        Negative exponent.
    q : float, default=2.0
        Chord exponent, at least 1.
    tol : float, default=1e-2
        Residual below which a fit counts as converged.
    max_iter : int, default=500
    n_directions, section_budget : int, optional
        Quadrature budgets, see :class:`~chordmink.quadrature.QuadratureScheme`.
    n_jobs : int, default=1
    random_state : int, default=0

    Attributes
    ----------
    polytope_ : Polytope
        The solution Q.
    support_ : ndarray of shape (N,)
        Support values of Q at the atoms.
    residual_ : ndarray of shape (N,)
        Per-atom relative residuals.
    scaling_ : float
        Final dilation factor.
    n_iter_ : int
    converged_ : bool
    report_ : SolveReport

    Examples
    --------
    >>> import numpy as np
    >>> th = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    >>> X = np.column_stack([np.cos(th), np.sin(th)])
    >>> est = LpChordMinkowskiSolver(p=-1.0, q=1.0).fit(X)
    >>> bool(est.converged_)
    True
    """

    def __init__(self, p=-1.0, q=2.0, tol=1e-2, max_iter=500, n_directions=None,
                 section_budget=64, n_jobs=1, random_state=0):
        self.p = p
        self.q = q
        self.tol = tol
        self.max_iter = max_iter
        self.n_directions = n_directions
        self.section_budget = section_budget
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _scheme(self, dim):
        return QuadratureScheme(dim, n_directions=self.n_directions,
                                section_budget=self.section_budget,
                                seed=self.random_state, n_jobs=self.n_jobs)

    def _measure(self, X, sample_weight):
        X = check_array(X, ensure_min_samples=3, ensure_min_features=2)
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("zero vector in X")
        w = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, float)
        return DiscreteMeasure(X / norms, w)

    def fit(self, X, y=None, sample_weight=None):
        """Solve for the polytope.

        Parameters
        ----------
        X : array-like of shape (N, n)
            Directions of the atoms (normalized internally).
        y : ignored
        sample_weight : array-like of shape (N,), optional
            Atom masses; all ones by default.
        """
        m = self._measure(X, sample_weight)
        cfg = SolverConfig(p=self.p, q=self.q, residual_tol=self.tol,
                           max_outer=self.max_iter, scheme=self._scheme(m.dim),
                           seed=self.random_state)
        rep = outer_solve(m, cfg)
        self.report_ = rep
        self.polytope_ = rep.polytope
        self.support_ = rep.polytope.support_values
        self.residual_ = rep.residual
        self.scaling_ = rep.scaling_c
        self.n_iter_ = rep.iterations
        self.converged_ = rep.converged
        self.n_features_in_ = m.dim
        return self

    def predict(self, X):
        """Support function of the fitted polytope at the rows of ``X``."""
        check_is_fitted(self, "polytope_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("zero vector in X")
        return (X / norms @ self.polytope_.vertices.T).max(axis=1)

    def score(self, X, y=None, sample_weight=None):
        """Negative largest relative residual of ``F_{p,q}`` against the measure."""
        check_is_fitted(self, "polytope_")
        m = self._measure(X, sample_weight)
        try:
            r, _ = verify(self.polytope_, m, self.p, self.q, self._scheme(m.dim))
        except PolytopeError as exc:
            raise ValueError(str(exc)) from None
        return -float(r.max())
