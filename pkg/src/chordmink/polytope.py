"""Polytopes given as intersections of halfspaces ``{x : v_i . x <= h_i}``."""
import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import HalfspaceIntersection

from ._config import SUBSET_ENUMERATION_MAX_N, TOL
from .quadrature import segment_rule, triangle_rule
from .utils import (
    check_direction,
    check_normals,
    check_point,
    chebyshev_center,
    max_hemisphere_margin,
)


class PolytopeError(ValueError):
    """Raised when a halfspace system does not define a convex body."""


@dataclass(frozen=True)
class Facet:
    active: bool
    vertex_indices: tuple
    area: float
    centroid: Optional[np.ndarray]


@dataclass(frozen=True)
class FacetQuadrature:
    facet_index: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class Polytope:
    """Bounded polytope ``P = {x : v_i . x <= h_i, i = 1..N}``.

    Build instances with :func:`wulff_shape`; the constructor only stores
    precomputed data.

    Attributes
    ----------
    normals : ndarray (N, n)
    support : ndarray (N,)
        Offsets as given. For an inactive constraint this may exceed the
        true support value, see :attr:`support_values`.
    vertices : ndarray (K, n)
    facets : tuple of Facet
    inner_radius, outer_radius : float
        Largest inscribed ball radius and the largest vertex distance from
        the vertex centroid.
    center : ndarray (n,)
        Center of the largest inscribed ball.
    """

    normals: np.ndarray
    support: np.ndarray
    vertices: np.ndarray
    facets: tuple
    outer_radius: float
    # (K, N) vertex slacks h_i - v_i . x_k, clipped at 0
    slack: np.ndarray = field(repr=False)
    # ridges: (n-2)-faces; vertices for n=2, vertex pairs for n=3
    ridges: np.ndarray = field(repr=False)
    # (R, N) boolean ridge/facet incidence
    ridge_facets: np.ndarray = field(repr=False)

    @functools.cached_property
    def _chebyshev(self):
        return chebyshev_center(self.normals, self.support)

    @property
    def center(self):
        return self._chebyshev[0]

    @property
    def inner_radius(self):
        return self._chebyshev[1]

    @property
    def dim(self):
        return self.normals.shape[1]

    @property
    def n_facets(self):
        return self.normals.shape[0]

    @property
    def active(self):
        return np.array([f.active for f in self.facets])

    @property
    def areas(self):
        return np.array([f.area for f in self.facets])

    @property
    def support_values(self):
        """True support values ``h_P(v_i) = max_k v_i . x_k``."""
        return (self.vertices @ self.normals.T).max(axis=0)

    def contains(self, z, tol=None):
        z = check_point(z, self.dim)
        tol = TOL.vertex * max(1.0, self.outer_radius) if tol is None else tol
        return bool(np.all(self.normals @ z <= self.support + tol))

    def to_dict(self):
        return {
            "dim": self.dim,
            "normals": self.normals.tolist(),
            "support": self.support.tolist(),
            "vertices": self.vertices.tolist(),
            "facets": [
                {"normal_index": i, "area": float(f.area), "active": bool(f.active)}
                for i, f in enumerate(self.facets)
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def polytope_from_dict(data):
    """Rebuild a polytope from its serialized halfspace data.

    Only ``normals`` and ``support`` are used; vertices and facets are
    recomputed.
    """
    try:
        v = np.asarray(data["normals"], dtype=float)
        h = np.asarray(data["support"], dtype=float)
    except (KeyError, TypeError, ValueError):
        raise PolytopeError("polytope JSON needs 'normals' and 'support'") from None
    if "dim" in data and v.ndim == 2 and v.shape[1] != data["dim"]:
        raise PolytopeError("'dim' does not match the normals")
    return wulff_shape(v, h, normalize=True)


def load_polytope(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PolytopeError(f"malformed polytope file: {exc}") from None
    return polytope_from_dict(data)


def _dedup_points(points, tol):
    kept = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in kept):
            kept.append(p)
    return np.array(kept)


def _vertices_by_subsets(v, h, tol):
    N, n = v.shape
    combos = np.array(list(itertools.combinations(range(N), n)), dtype=np.intp)
    A = v[combos]
    b = h[combos]
    det = np.linalg.det(A)
    ok = np.abs(det) > 1e-12
    x = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
    feas = np.all(x @ v.T <= h + tol, axis=1)
    return x[feas]


def _vertices_by_qhull(v, h, interior):
    halfspaces = np.hstack([v, -h[:, None]])
    return HalfspaceIntersection(halfspaces, interior).intersections


def _plane_basis(normal):
    """Orthonormal basis (rows) of the hyperplane orthogonal to ``normal``."""
    n = normal.shape[0]
    q, _ = np.linalg.qr(np.column_stack([normal, np.eye(n)]))
    return q[:, 1:n].T


def _facet_geometry(points, normal):
    """Area, centroid and cyclic vertex order of a facet."""
    n = normal.shape[0]
    if len(points) < n:
        return 0.0, None, np.arange(len(points))
    if n == 2:
        d = np.array([-normal[1], normal[0]])
        t = points @ d
        order = np.argsort(t)
        lo, hi = order[0], order[-1]
        return float(t[hi] - t[lo]), 0.5 * (points[lo] + points[hi]), np.array([lo, hi])
    B = _plane_basis(normal)
    c0 = points.mean(axis=0)
    uv = (points - c0) @ B.T
    ang = np.arctan2(uv[:, 1], uv[:, 0])
    order = np.argsort(ang, kind="stable")
    uv = uv[order]
    x, y = uv[:, 0], uv[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area <= 0:
        return 0.0, None, order
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), c0 + cx * B[0] + cy * B[1], order


@functools.lru_cache(maxsize=64)
def _hemisphere_margin(buf, shape):
    # solvers rebuild many Wulff shapes over one fixed normal set
    return max_hemisphere_margin(np.frombuffer(buf).reshape(shape))[0]


def wulff_shape(normals, support, *, normalize=False):
    """Polytope ``{x : v_i . x <= h_i}`` with its vertex and facet structure.

    Parameters
    ----------
    normals : array-like (N, n)
        Unit normals (set ``normalize=True`` to rescale).
    support : array-like (N,)
        Halfspace offsets.

    Raises
    ------
    PolytopeError
        If the intersection is unbounded or has empty interior.
    """
    v = check_normals(normals, normalize=normalize)
    h = np.asarray(support, dtype=float).reshape(-1)
    N, n = v.shape
    if h.shape != (N,) or not np.all(np.isfinite(h)):
        raise PolytopeError("support must be a finite vector with one entry per normal")
    if _hemisphere_margin(v.tobytes(), v.shape) > TOL.hemisphere_margin:
        raise PolytopeError("unbounded intersection: normals lie in a hemisphere")
    scale = max(1.0, float(np.abs(h).max()))
    if h.min() > TOL.empty_interior * scale:
        # the origin is interior; its distance to the boundary bounds r below
        center = np.zeros(n)
    else:
        center, r = chebyshev_center(v, h)
        if not math.isfinite(r):
            raise PolytopeError("unbounded or infeasible halfspace system")
        if r <= TOL.empty_interior * scale:
            raise PolytopeError(f"empty interior (inscribed radius {r:.3g})")

    tol = TOL.vertex * scale
    if N <= SUBSET_ENUMERATION_MAX_N and n <= 3:
        raw = _vertices_by_subsets(v, h, tol)
    else:
        raw = _vertices_by_qhull(v, h, center)
    verts = _dedup_points(raw, 10 * tol)
    # lexicographic order makes the vertex list independent of enumeration
    verts = verts[np.lexsort(verts.T[::-1])]
    g = verts.mean(axis=0)
    R = float(np.linalg.norm(verts - g, axis=1).max())
    tight_tol = TOL.vertex * max(1.0, R)

    slack = h[None, :] - verts @ v.T
    tight = slack <= 10 * tight_tol
    area_floor = TOL.facet_area * R ** (n - 1)
    facets = []
    orders = []
    taken = []
    for i in range(N):
        idx = np.flatnonzero(tight[:, i])
        area, centroid, order = _facet_geometry(verts[idx], v[i])
        dup = any(
            np.linalg.norm(v[i] - v[j]) < TOL.duplicate_angle and abs(h[i] - h[j]) <= tight_tol
            for j in taken
        )
        active = area > area_floor and not dup
        if active:
            taken.append(i)
        facets.append(Facet(active, tuple(int(k) for k in idx[order]), area if active else 0.0,
                            centroid if active else None))
        orders.append(idx[order])

    ridges, ridge_facets = _ridges(n, facets, len(verts), N)
    poly = Polytope(
        normals=v,
        support=h,
        vertices=verts,
        facets=tuple(facets),
        outer_radius=R,
        # exact zeros on tight constraints keep slack / (v . u) stable
        slack=np.where(tight, 0.0, np.maximum(slack, 0.0)),
        ridges=ridges,
        ridge_facets=ridge_facets,
    )
    for arr in (v, h, verts, poly.slack, ridges, ridge_facets):
        arr.setflags(write=False)
    return poly


def _ridges(n, facets, n_vertices, N):
    if n == 2:
        inc = np.zeros((n_vertices, N), dtype=bool)
        for i, f in enumerate(facets):
            if f.active:
                inc[list(f.vertex_indices), i] = True
        return np.arange(n_vertices), inc
    if n != 3:
        return np.zeros((0, 2), dtype=np.intp), np.zeros((0, N), dtype=bool)
    edges = {}
    for i, f in enumerate(facets):
        if not f.active:
            continue
        cyc = f.vertex_indices
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            key = (min(a, b), max(a, b))
            edges.setdefault(key, set()).add(i)
    keys = sorted(edges)
    inc = np.zeros((len(keys), N), dtype=bool)
    for r, key in enumerate(keys):
        inc[r, sorted(edges[key])] = True
    return np.array(keys, dtype=np.intp).reshape(-1, 2), inc


def canonicalize(P):
    """Rebuild ``P`` from its true support values."""
    return wulff_shape(P.normals, P.support_values)


def support_function(P, u, *, return_vertex=False):
    """``h_P(u) = max_x x . u`` over the vertices."""
    u = check_direction(u, P.dim)
    vals = P.vertices @ u
    k = int(np.argmax(vals))
    if return_vertex:
        return float(vals[k]), P.vertices[k].copy()
    return float(vals[k])


def _chord_bounds(v, h, z, u):
    a = v @ u
    c = h - v @ z
    with np.errstate(divide="ignore", invalid="ignore"):
        t = c / a
    up = np.where(a > 0, t, np.inf).min()
    lo = np.where(a < 0, t, -np.inf).max()
    return up, lo


def radial_function(P, z, u):
    """``max{lam >= 0 : z + lam u in P}`` for ``z`` in ``P``."""
    z = check_point(z, P.dim)
    u = check_direction(u, P.dim)
    if not P.contains(z):
        raise PolytopeError("point lies outside the polytope")
    up, _ = _chord_bounds(P.normals, P.support, z, u)
    return float(max(up, 0.0))


def xray(P, z, u):
    """Length of the chord ``P ∩ (z + R u)``."""
    z = check_point(z, P.dim)
    u = check_direction(u, P.dim)
    if not P.contains(z):
        raise PolytopeError("point lies outside the polytope")
    up, lo = _chord_bounds(P.normals, P.support, z, u)
    return float(max(up, 0.0) + max(-lo, 0.0))


def facet_quadrature(P, i, order=5):
    """Quadrature nodes on facet ``i``, exact for polynomials of degree ``order``.

    The facet is split into simplices around its centroid and a symmetric
    rule is applied on each piece.
    """
    f = P.facets[i]
    if not f.active:
        raise PolytopeError(f"facet {i} is inactive")
    if P.dim not in (2, 3):
        raise NotImplementedError("facet quadrature is available for n in {2, 3}")
    pts = P.vertices[list(f.vertex_indices)]
    c = f.centroid
    nodes, weights = [], []
    if P.dim == 2:
        x, w = segment_rule(order)
        for end in pts:
            L = np.linalg.norm(end - c)
            nodes.append(c + x[:, None] * (end - c))
            weights.append(w * L)
    else:
        bary, w = triangle_rule(order)
        for a, b in zip(pts, np.roll(pts, -1, axis=0)):
            tri_area = 0.5 * np.linalg.norm(np.cross(a - c, b - c))
            nodes.append(bary @ np.array([c, a, b]))
            weights.append(w * tri_area)
    return FacetQuadrature(i, np.vstack(nodes), np.concatenate(weights))


def volume(P):
    """Volume as ``sum_i h_i |F_i| / n`` over active facets."""
    act = P.active
    return float(np.dot(P.support[act], P.areas[act]) / P.dim)


def surface_area(P):
    return float(P.areas.sum())


def translate(P, x):
    x = check_point(x, P.dim)
    return wulff_shape(P.normals, P.support + P.normals @ x)


def scale(P, t):
    if not t > 0:
        raise PolytopeError("scale factor must be positive")
    return wulff_shape(P.normals, t * P.support)
