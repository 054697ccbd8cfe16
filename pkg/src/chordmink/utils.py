"""Input validation and small numerical helpers."""
import math

import numpy as np
from scipy.optimize import linprog

from ._config import TOL


def unit_ball_volume(n):
    """Volume of the n-dimensional unit ball (n may be fractional)."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_area(n):
    """Surface measure of S^{n-1}, i.e. n * omega_n."""
    return n * unit_ball_volume(n)


def check_normals(normals, *, normalize=False, min_dim=2):
    """Validate an ``(N, n)`` array of directions.

    Parameters
    ----------
    normals : array-like of shape (N, n)
    normalize : bool
        If True rescale rows to unit length, otherwise require unit rows.

    Returns
    -------
    ndarray of shape (N, n), float64
    """
    v = np.asarray(normals, dtype=float)
    if v.ndim != 2:
        raise ValueError(f"normals must be a 2-D array, got shape {v.shape}")
    if v.shape[1] < min_dim:
        raise ValueError(f"dimension must be >= {min_dim}, got {v.shape[1]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("normals contain non-finite values")
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero vector among normals")
    if normalize:
        return v / norms[:, None]
    if np.any(np.abs(norms - 1.0) > TOL.unit_norm):
        raise ValueError("normals must have unit length")
    return v


def check_weights(weights, n_atoms):
    w = np.asarray(weights, dtype=float)
    if w.shape != (n_atoms,):
        raise ValueError(f"expected {n_atoms} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w <= 0):
        raise ValueError("non-positive weight")
    return w


def check_point(z, dim):
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (dim,):
        raise ValueError(f"expected a point in R^{dim}, got shape {z.shape}")
    return z


def check_direction(u, dim):
    u = check_point(u, dim)
    nu = np.linalg.norm(u)
    if nu == 0.0:
        raise ValueError("direction must be nonzero")
    return u / nu


def max_hemisphere_margin(normals):
    """Largest t such that some w with ``max|w_k| <= 1`` has ``w . v_i >= t``.

    Returns ``(t, w)``. The directions lie in an open hemisphere iff
    ``t > 0``; in that case ``w`` is a witness.
    """
    v = np.asarray(normals, dtype=float)
    N, n = v.shape
    # variables (w_1..w_n, t); maximize t
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([-v, np.ones((N, 1))])
    b = np.zeros(N)
    bounds = [(-1.0, 1.0)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"hemisphere LP failed: {res.message}")
    return float(res.x[-1]), res.x[:n].copy()


def chebyshev_center(normals, offsets):
    """Center and radius of the largest ball in ``{x : v_i . x <= h_i}``.

    Returns ``(center, radius)``; radius is ``inf`` for unbounded problems.
    """
    v = np.asarray(normals, dtype=float)
    h = np.asarray(offsets, dtype=float)
    N, n = v.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([v, np.linalg.norm(v, axis=1)[:, None]])
    bounds = [(None, None)] * n + [(0.0, None)]
    res = linprog(c, A_ub=A, b_ub=h, bounds=bounds, method="highs")
    if res.status == 3:
        return np.full(n, np.nan), math.inf
    if res.status == 2:
        return np.full(n, np.nan), -math.inf
    if res.status != 0:
        raise RuntimeError(f"Chebyshev center LP failed: {res.message}")
    return res.x[:n].copy(), float(res.x[-1])
