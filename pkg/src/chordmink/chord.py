"""Chord integrals, chord measures and dual quermassintegrals of polytopes.

For a fixed direction u the chord length y -> X(y, u) over the hyperplane
u^perp is piecewise linear, with breaks on the projections of the ridges
((n-2)-faces) of P. Between breaks the integral of X^r has a closed form,
so every section integral below is exact in the plane and exact up to a
Gauss rule across slices in space. The only remaining discretization is
the sum over sphere directions.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._config import TOL
from .polytope import PolytopeError, facet_quadrature, surface_area, volume, wulff_shape
from .quadrature import QuadratureScheme, gauss_legendre_unit
from .utils import check_point, sphere_area, unit_ball_volume

# elements per work array; bounds memory of the vectorized kernels
_CHUNK_ELEMENTS = 2_000_000
_EPS = np.finfo(float).eps
# principal-axis ratio above which chord integrals switch to the isotropic frame
_ISOTROPY_RATIO = 1.5


@dataclass(frozen=True)
class ChordMeasureVector:
    """Per-normal values of ``F_q`` (or ``F_{p,q}`` when ``p`` is set)."""

    values: np.ndarray
    q: float
    estimated_error: np.ndarray
    p: Optional[float] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def default_scheme(P_or_dim):
    dim = P_or_dim if isinstance(P_or_dim, int) else P_or_dim.dim
    return QuadratureScheme(dim)


def _mean_power(a, b, r):
    """Average of ``X**r`` over a piece on which X is linear from a to b."""
    a = np.maximum(a, 0.0)
    b = np.maximum(b, 0.0)
    if r == 0:
        return (np.maximum(a, b) > 0).astype(float)
    m = 0.5 * (a + b)
    d = b - a
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        exact = (b ** (r + 1) - a ** (r + 1)) / ((r + 1) * d)
        eps = d / m
        series = m**r * (1.0 + r * (r - 1) / 24.0 * eps * eps)
    small = np.abs(d) <= 1e-3 * m
    out = np.where(small, series, exact)
    return np.where(m > 0, out, 0.0)


def _chord_from_slack(slack, a):
    """Chord length through points with constraint slacks ``slack``.

    ``slack[..., i] = h_i - v_i . z`` and ``a[..., i] = v_i . u`` broadcast
    against each other; returns ``X(z, u)``.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        t = slack / a
    up = np.where(a > 0, t, np.inf).min(axis=-1)
    lo = np.where(a < 0, t, -np.inf).max(axis=-1)
    return np.maximum(up - lo, 0.0)


def _terms_2d(P, U, total_exps, facet_exps):
    """Section integrals for directions ``U`` in the plane.

    Returns ``totals (M, len(total_exps))`` with the integral of X^q over
    u^perp, and ``facets (M, N, len(facet_exps))`` with the integral of
    X^r over each facet (as a subset of the boundary).
    """
    W, v, slack = P.vertices, P.normals, P.slack
    M, N, K = len(U), len(v), len(W)
    e = np.column_stack([-U[:, 1], U[:, 0]])
    a = U @ v.T
    s = e @ W.T
    X = _chord_from_slack(slack[None, :, :], a[:, None, :])
    order = np.argsort(s, axis=1, kind="stable")
    s_sorted = np.take_along_axis(s, order, axis=1)
    X_sorted = np.take_along_axis(X, order, axis=1)
    L = np.diff(s_sorted, axis=1)
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(K)[None, :].repeat(M, 0), axis=1)

    act = P.active
    ends = np.array([
        [f.vertex_indices[0], f.vertex_indices[-1]] if f.active else [0, 0]
        for f in P.facets
    ], dtype=np.intp)
    r0 = rank[:, ends[:, 0]]
    r1 = rank[:, ends[:, 1]]
    absa = np.abs(a)
    usable = act[None, :] & (absa > TOL.parallel)

    totals = np.empty((M, len(total_exps)))
    facets = np.zeros((M, N, len(facet_exps)))
    cache = {}
    for r in set(total_exps) | set(facet_exps):
        cache[r] = L * _mean_power(X_sorted[:, :-1], X_sorted[:, 1:], r)
    for j, q in enumerate(total_exps):
        totals[:, j] = cache[q].sum(axis=1)
    for j, r in enumerate(facet_exps):
        C = np.concatenate([np.zeros((M, 1)), np.cumsum(cache[r], axis=1)], axis=1)
        diff = np.abs(np.take_along_axis(C, r1, 1) - np.take_along_axis(C, r0, 1))
        with np.errstate(divide="ignore", invalid="ignore"):
            facets[:, :, j] = np.where(usable, diff / absa, 0.0)
    return totals, facets


def _slices_per_interval(P, scheme):
    n_int = max(1, len(P.vertices) - 1)
    return max(2, math.ceil(scheme.section_budget / n_int))


def _orthonormal_frames(U):
    """Two unit vectors per row completing ``u`` to an orthonormal frame."""
    ref = np.zeros_like(U)
    ref[np.arange(len(U)), np.argmin(np.abs(U), axis=1)] = 1.0
    e1 = np.cross(U, ref)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(U, e1)
    return e1, e2


def _terms_3d(P, U, total_exps, facet_exps, g):
    """Section integrals in space: Gauss slices across u^perp.

    Slices are placed between consecutive projections of the vertices onto
    the first in-plane axis; along each slice the chord length is piecewise
    linear with breaks where the slice meets projected edges.
    """
    W, v, slack = P.vertices, P.normals, P.slack
    edges, inc = P.ridges, P.ridge_facets
    M, N = len(U), len(v)
    e1, e2 = _orthonormal_frames(U)
    a = U @ v.T
    sv = e1 @ W.T
    tv = e2 @ W.T
    sb = np.sort(sv, axis=1)
    lo_b, hi_b = sb[:, :-1], sb[:, 1:]
    ds = hi_b - lo_b
    xg, wg = gauss_legendre_unit(g)
    # (M, I, g) slice positions and weights
    s_nodes = lo_b[:, :, None] + ds[:, :, None] * xg
    s_w = ds[:, :, None] * wg

    s0, s1 = sv[:, edges[:, 0]], sv[:, edges[:, 1]]
    smin, smax = np.minimum(s0, s1), np.maximum(s0, s1)
    # edges crossing each whole interval; fixed within the interval
    cross = (smin[:, None, :] <= lo_b[:, :, None]) & (smax[:, None, :] >= hi_b[:, :, None])
    cross &= ds[:, :, None] > 0
    cmax = max(int(cross.sum(axis=2).max()), 1)
    sel = np.argsort(~cross, axis=2, kind="stable")[:, :, :cmax]
    valid = np.take_along_axis(cross, sel, axis=2)

    eidx0 = edges[sel, 0]
    eidx1 = edges[sel, 1]
    mi = np.arange(M)[:, None, None]
    S0, S1 = sv[mi, eidx0], sv[mi, eidx1]
    T0, T1 = tv[mi, eidx0], tv[mi, eidx1]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (s_nodes[..., None] - S0[:, :, None, :]) / (S1 - S0)[:, :, None, :]
    lam = np.where(valid[:, :, None, :], lam, 0.5)
    t = T0[:, :, None, :] + lam * (T1 - T0)[:, :, None, :]
    t = np.where(valid[:, :, None, :], t, np.inf)

    # chord lengths at crossing points: slack is affine along an edge, so
    # each exit/entry parameter is affine in lam; reduce one facet at a time
    up = np.full(lam.shape, np.inf)
    dn = np.full(lam.shape, -np.inf)
    for i in range(N):
        ai = a[:, i][:, None, None]
        c0 = slack[eidx0, i]
        c1 = slack[eidx1, i]
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (c0 / ai)[:, :, None, :]
            dt = ((c1 - c0) / ai)[:, :, None, :]
        ti = t0 + lam * dt
        pos = (ai > 0)[:, :, None, :]
        neg = (ai < 0)[:, :, None, :]
        np.minimum(up, np.where(pos, ti, np.inf), out=up)
        np.maximum(dn, np.where(neg, ti, -np.inf), out=dn)
    X = np.where(valid[:, :, None, :], np.maximum(up - dn, 0.0), 0.0)

    order = np.argsort(t, axis=3, kind="stable")
    t_s = np.take_along_axis(t, order, axis=3)
    X_s = np.take_along_axis(X, order, axis=3)
    finite = np.isfinite(t_s)
    ok = finite[..., 1:] & finite[..., :-1]
    L = np.where(ok, np.diff(np.where(finite, t_s, 0.0), axis=3), 0.0)
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.broadcast_to(np.arange(cmax), order.shape).copy(), axis=3)

    act = P.active
    # (M, I, cmax, N) incidence of crossing edges with facets
    inc_sel = inc[sel] & valid[..., None]
    # a slice crossing a facet polygon meets exactly two of its edges
    slot_a = np.argmax(inc_sel, axis=2)[:, :, None, :]
    slot_b = (cmax - 1 - np.argmax(inc_sel[:, :, ::-1], axis=2))[:, :, None, :]
    slot_a = np.broadcast_to(slot_a, (M, lo_b.shape[1], len(xg), N))
    slot_b = np.broadcast_to(slot_b, slot_a.shape)
    crossed = inc_sel.any(axis=2)[:, :, None, :]
    absa = np.abs(a)
    usable = act[None, :] & (absa > TOL.parallel)

    totals = np.empty((M, len(total_exps)))
    facets = np.zeros((M, N, len(facet_exps)))
    cache = {}
    for r in set(total_exps) | set(facet_exps):
        cache[r] = L * _mean_power(X_s[..., :-1], X_s[..., 1:], r)
    for j, q in enumerate(total_exps):
        per_slice = cache[q].sum(axis=3)
        totals[:, j] = (per_slice * s_w).sum(axis=(1, 2))
    for j, r in enumerate(facet_exps):
        C = np.concatenate([np.zeros(cache[r].shape[:3] + (1,)), np.cumsum(cache[r], axis=3)], axis=3)
        C_edge = np.take_along_axis(C, rank, axis=3)
        C_a = np.take_along_axis(C_edge, slot_a, axis=3)
        C_b = np.take_along_axis(C_edge, slot_b, axis=3)
        span = np.where(crossed, np.abs(C_b - C_a), 0.0)
        proj = (span * s_w[..., None]).sum(axis=(1, 2))
        with np.errstate(divide="ignore", invalid="ignore"):
            facets[:, :, j] = np.where(usable, proj / absa, 0.0)
    return totals, facets


def _direction_terms(P, scheme, total_exps, facet_exps):
    if P.dim not in (2, 3):
        raise NotImplementedError("chord quadrature is available for n in {2, 3}")
    U, _ = scheme.nodes
    N, K = P.n_facets, len(P.vertices)
    if P.dim == 2:
        per_dir = K * N
        kernel = lambda Uc: _terms_2d(P, Uc, total_exps, facet_exps)  # noqa: E731
    else:
        g = _slices_per_interval(P, scheme)
        per_dir = max(K - 1, 1) * g * min(len(P.ridges), 2 * K) * N
        kernel = lambda Uc: _terms_3d(P, Uc, total_exps, facet_exps, g)  # noqa: E731
    step = max(1, min(len(U), _CHUNK_ELEMENTS // max(per_dir, 1)))
    chunks = [U[i:i + step] for i in range(0, len(U), step)]
    if scheme.n_jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(scheme.n_jobs) as pool:
            parts = list(pool.map(kernel, chunks))
    else:
        parts = [kernel(c) for c in chunks]
    totals = np.concatenate([p[0] for p in parts], axis=0)
    facets = np.concatenate([p[1] for p in parts], axis=0)
    return totals, facets


def _sphere_sum(values, scheme):
    """Full and half-budget quadrature sums over the direction axis 0."""
    _, w = scheme.nodes
    mask = scheme.coarse_mask()
    wc = np.where(mask, w * (len(w) / mask.sum()), 0.0)
    full = np.tensordot(w, values, axes=(0, 0))
    coarse = np.tensordot(wc, values, axes=(0, 0))
    # floor: worst-case rounding of an M-term sum of nonnegative terms
    err = np.maximum(np.abs(full - coarse), len(w) * _EPS * np.abs(full))
    return full, err


def chord_terms(P, q, scheme=None):
    """``(I_q, err_I, F_q, err_F)`` from a single pass over the directions."""
    if q < 1:
        raise ValueError("chord measures need q >= 1")
    scheme = scheme or default_scheme(P)
    totals, facets = _direction_terms(P, scheme, (q,), (q - 1,))
    c = 1.0 / sphere_area(P.dim)
    I, I_err = _sphere_sum(totals[:, 0], scheme)
    F, F_err = _sphere_sum(facets[:, :, 0], scheme)
    return c * I, c * I_err, q * c * F, q * c * F_err


def _isotropic_frame(P):
    """``(A, K)`` with ``det A = 1``, ``P = A K`` and K in isotropic vertex position.

    Lines transform as ``dL_P = |det A|^2 |A w|^(-n-1) dL_K`` with
    ``X_P = |A w| X_K``, so ``I_q(P)`` is the sphere integral of
    ``|A w|^(q-n-1)`` times the section integral of ``X_K^q``. Returns
    ``(None, P)`` when P is already nearly isotropic.
    """
    n = P.dim
    W = P.vertices - P.vertices.mean(axis=0)
    lam, E = np.linalg.eigh(W.T @ W / len(W))
    if not lam[0] > 0 or lam[-1] <= _ISOTROPY_RATIO**2 * lam[0]:
        return None, P
    root = np.sqrt(lam)
    root = root / np.prod(root) ** (1.0 / n)
    A = (E * root) @ E.T
    # {x : v.x <= h} = A {y : (A^T v).y <= h}
    c = P.normals @ A
    norms = np.linalg.norm(c, axis=1)
    K = wulff_shape(c / norms[:, None], P.support / norms)
    return A, K


def chord_integral(P, q, scheme=None, *, return_error=False):
    """Chord integral ``I_q(P)``, the integral of ``|P ∩ l|^q`` over lines.

    Parameters
    ----------
    P : Polytope
    q : float or sequence of float
        Exponent(s) ``q >= 0``; a sequence is evaluated in one pass.
    scheme : QuadratureScheme, optional
    return_error : bool
        Also return the half-budget error estimate.
    """
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any(qs < 0):
        raise ValueError("q must be nonnegative")
    scheme = scheme or default_scheme(P)
    n = P.dim
    A, K = _isotropic_frame(P)
    # the direction integrand is flat in u at q = 1 and flat in the isotropic
    # frame at q = n + 1; use the frame whose anisotropy exponent is smaller
    use_frame = (qs > (n + 2) / 2) if A is not None else np.zeros(len(qs), bool)
    totals = np.empty((scheme.n_directions, len(qs)))
    if not use_frame.all():
        direct = tuple(qs[~use_frame].tolist())
        totals[:, ~use_frame] = _direction_terms(P, scheme, direct, ())[0]
    if use_frame.any():
        qf = qs[use_frame]
        U, _ = scheme.nodes
        stretch = np.linalg.norm(U @ A.T, axis=1)
        tk = _direction_terms(K, scheme, tuple(qf.tolist()), ())[0]
        totals[:, use_frame] = tk * stretch[:, None] ** (qf - n - 1)[None, :]
    val, err = _sphere_sum(totals, scheme)
    val, err = val / sphere_area(n), err / sphere_area(n)
    if np.ndim(q) == 0:
        val, err = float(val[0]), float(err[0])
    return (val, err) if return_error else val


def chord_integral_reference(P, q):
    """Closed forms of ``I_q`` for ``q`` in ``{0, 1, n + 1}``."""
    n = P.dim
    if q == 1:
        return volume(P)
    if q == 0:
        return unit_ball_volume(n - 1) / (n * unit_ball_volume(n)) * surface_area(P)
    if q == n + 1:
        return (n + 1) / unit_ball_volume(n) * volume(P) ** 2
    raise ValueError(f"no closed form for q={q}; use q in (0, 1, {n + 1})")


def ball_chord_integral(n, q):
    """``I_q`` of the unit ball via the Beta-integral reduction of Crofton's formula."""
    return 2.0**q * math.pi ** ((n - 1) / 2) * math.gamma(q / 2 + 1) / math.gamma((n + q + 1) / 2)


def chord_measure(P, q, scheme=None, *, method="section"):
    """Chord measure ``F_q(P, {v_i})`` for each facet normal.

    Parameters
    ----------
    method : {"section", "facet"}
        ``"section"`` integrates the X-ray over each facet exactly per
        direction; ``"facet"`` evaluates the dual quermassintegral at facet
        quadrature nodes (slower, used for cross-checks).
    """
    if q < 1:
        raise ValueError("chord measures are implemented for q >= 1 only")
    scheme = scheme or default_scheme(P)
    if method == "section":
        _, _, F, err = chord_terms(P, q, scheme)
    elif method == "facet":
        F, err = _chord_measure_facet(P, q, scheme)
    else:
        raise ValueError(f"unknown method {method!r}")
    F = np.where(P.active, F, 0.0)
    err = np.where(P.active, err, 0.0)
    return ChordMeasureVector(F, float(q), err)


def _xray_power_sum(P, Z, q, scheme):
    """Per-point full and coarse sums of ``w_j X(z, u_j)^(q-1)``."""
    U, w = scheme.nodes
    slack = np.maximum(P.support[None, :] - Z @ P.normals.T, 0.0)
    out = np.empty((len(Z), len(U)))
    step = max(1, _CHUNK_ELEMENTS // (len(U) * P.n_facets))
    a = U @ P.normals.T
    for i in range(0, len(Z), step):
        X = _chord_from_slack(slack[i:i + step, None, :], a[None, :, :])
        out[i:i + step] = (X > 0) if q == 1 else X ** (q - 1)
    return out


def _chord_measure_facet(P, q, scheme):
    n = P.dim
    F = np.zeros(P.n_facets)
    err = np.zeros(P.n_facets)
    for i, f in enumerate(P.facets):
        if not f.active:
            continue
        fq = facet_quadrature(P, i, scheme.facet_order)
        vals = _xray_power_sum(P, fq.nodes, q, scheme)
        full, e = _sphere_sum(vals.T, scheme)
        # V_{q-1}(P, z) = (1/2n) sum_j w_j X^(q-1); F = (2q/omega_n) int V
        coef = 2.0 * q / unit_ball_volume(n) / (2.0 * n)
        F[i] = coef * np.dot(fq.weights, full)
        err[i] = coef * np.dot(fq.weights, e)
    return F, err


def lp_chord_measure(P, p, q, scheme=None, *, method="section"):
    """``F_{p,q}(P, {v_i}) = h_P(v_i)^(1-p) F_q(P, {v_i})``."""
    h = P.support_values
    act = P.active
    if np.any(h[act] <= 0) or not P.contains(np.zeros(P.dim), tol=0.0):
        raise PolytopeError("origin must lie in the interior of P")
    F = chord_measure(P, q, scheme, method=method)
    w = np.where(act, np.abs(h) ** (1.0 - p), 0.0)
    return ChordMeasureVector(F.values * w, float(q), F.estimated_error * w, float(p))


def dual_quermassintegral(P, z, q, scheme=None):
    """Dual quermassintegral ``V~_q(P, z)`` for ``z`` in ``P``.

    Uses the radial form ``(1/n) sum w_j rho(u_j)^q`` at interior points and
    the X-ray form ``(1/2n) sum w_j X(z, u_j)^q`` on the boundary.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    z = check_point(z, P.dim)
    scheme = scheme or default_scheme(P)
    scale = TOL.vertex * max(1.0, P.outer_radius)
    c = P.support - P.normals @ z
    if np.any(c < -scale):
        raise PolytopeError("point lies outside the polytope")
    U, w = scheme.nodes
    a = U @ P.normals.T
    c = np.maximum(c, 0.0)
    n = P.dim
    if c.min() <= scale:
        X = _chord_from_slack(c[None, :], a)
        return float(np.dot(w, X**q) / (2 * n))
    with np.errstate(divide="ignore"):
        rho = np.where(a > 0, c / a, np.inf).min(axis=1)
    return float(np.dot(w, rho**q) / n)
