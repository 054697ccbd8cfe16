"""Independent reference computations used by the tests.

Nothing here calls the package's quadrature kernels: chords come from
clipping lines against the vertex polygon, integrals from dense midpoint
grids or adaptive 1-D quadrature.
"""
import math

import numpy as np
from scipy import integrate
from scipy.spatial import ConvexHull


def polygon_edges(vertices):
    """Counter-clockwise edge list ``(a, b)`` of a convex polygon."""
    hull = ConvexHull(vertices)
    cyc = vertices[hull.vertices]
    return cyc, np.roll(cyc, -1, axis=0)


def clip_chords(vertices, Z, u):
    """Chord lengths through points ``Z`` (k, 2) in direction ``u`` by edge clipping.

    Intersects each line ``z + s u`` with every polygon edge and returns
    ``max s - min s`` over the hits (0 if fewer than two).
    """
    a, b = polygon_edges(np.asarray(vertices, float))
    d = b - a
    u = np.asarray(u, float)
    u = u / np.linalg.norm(u)
    Z = np.atleast_2d(Z)
    # solve z + s u = a + t d  for (s, t) per edge
    det = u[0] * (-d[:, 1]) - u[1] * (-d[:, 0])
    out = np.zeros(len(Z))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = a[None, :, :] - Z[:, None, :]
        s = (r[..., 0] * (-d[:, 1]) - r[..., 1] * (-d[:, 0])) / det
        t = (u[0] * r[..., 1] - u[1] * r[..., 0]) / det
    hit = (np.abs(det) > 1e-14)[None, :] & (t >= -1e-12) & (t <= 1 + 1e-12)
    s_hi = np.where(hit, s, -np.inf).max(axis=1)
    s_lo = np.where(hit, s, np.inf).min(axis=1)
    ok = np.isfinite(s_hi) & np.isfinite(s_lo)
    out[ok] = np.maximum(s_hi[ok] - s_lo[ok], 0.0)
    return out


def grid_chord_integral_2d(vertices, q, n_theta=720, n_y=2000):
    """``I_q`` of a polygon on a midpoint grid in (angle, offset)."""
    V = np.asarray(vertices, float)
    total = 0.0
    for k in range(n_theta):
        th = math.pi * (k + 0.5) / n_theta
        u = np.array([math.cos(th), math.sin(th)])
        e = np.array([-u[1], u[0]])
        proj = V @ e
        lo, hi = proj.min(), proj.max()
        y = lo + (hi - lo) * (np.arange(n_y) + 0.5) / n_y
        X = clip_chords(V, y[:, None] * e[None, :], u)
        vals = (X > 0).astype(float) if q == 0 else X**q
        total += vals.sum() * (hi - lo) / n_y
    # lines through u and -u coincide; integrate theta over [0, pi) and
    # normalize by half the circle length
    return total * (math.pi / n_theta) / math.pi


def grid_chord_measure_square(q, n_s=2000, n_theta=4000):
    """``F_q`` on one facet of ``[-1, 1]^2`` from a dense (position, angle) grid.

    ``F_q = (2 q / omega_2) * int_facet V~_{q-1}(P, z) dz`` with the boundary
    X-ray form ``V~_{q-1}(P, z) = (1/4) int_0^{2 pi} X(z, theta)^(q-1) d theta``.
    """
    verts = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    s = -1.0 + 2.0 * (np.arange(n_s) + 0.5) / n_s
    Z = np.column_stack([np.ones(n_s), s])
    acc = np.zeros(n_s)
    for k in range(n_theta):
        th = 2 * math.pi * (k + 0.5) / n_theta
        X = clip_chords(verts, Z, [math.cos(th), math.sin(th)])
        acc += (X > 0) if q == 1 else X ** (q - 1)
    V = 0.25 * acc * (2 * math.pi / n_theta)
    return 2 * q / math.pi * V.sum() * (2.0 / n_s)


def riesz_boundary_potential(vertices, z, q, n_grid=1500):
    """``(q/n) int_P |x - z|^(q-n) dx`` for a polygon by a midpoint cell sum."""
    V = np.asarray(vertices, float)
    lo, hi = V.min(axis=0), V.max(axis=0)
    hx = (hi[0] - lo[0]) / n_grid
    hy = (hi[1] - lo[1]) / n_grid
    x = lo[0] + hx * (np.arange(n_grid) + 0.5)
    y = lo[1] + hy * (np.arange(n_grid) + 0.5)
    X, Y = np.meshgrid(x, y, indexing="ij")
    a, b = polygon_edges(V)
    inside = np.ones_like(X, dtype=bool)
    for p0, p1 in zip(a, b):
        inside &= (p1[0] - p0[0]) * (Y - p0[1]) - (p1[1] - p0[1]) * (X - p0[0]) >= 0
    r = np.hypot(X - z[0], Y - z[1])
    vals = np.where(inside, r ** (q - 2.0), 0.0)
    return q / 2.0 * vals.sum() * hx * hy


def ball_chord_integral_quad(n, q):
    """``I_q(B_n)`` from the Crofton formula reduced to a 1-D radial integral.

    Lines at distance ``y`` from the center have chord ``2 sqrt(1 - y^2)``;
    the offsets in ``u^perp`` at distance ``y`` form a sphere of radius ``y``
    in ``R^(n-1)``.
    """
    shell = (n - 1) * math.pi ** ((n - 1) / 2) / math.gamma((n - 1) / 2 + 1)
    f = lambda y: (2 * math.sqrt(max(1 - y * y, 0.0))) ** q * shell * y ** (n - 2)  # noqa: E731
    val, _ = integrate.quad(f, 0.0, 1.0, limit=200)
    return val


def omega_ratio_ball_constant(n, q):
    """``2^q omega_n omega_{n+q-1} / omega_q`` closed form, kept to document its mismatch with the disc area."""
    omega = lambda k: math.pi ** (k / 2) / math.gamma(k / 2 + 1)  # noqa: E731
    return 2.0**q * omega(n) * omega(n + q - 1) / omega(q)


def grid_argmin_phi(normals, h, alpha, p, levels=24, width=41):
    """Minimizer of ``-(1/p) sum alpha (h - xi.v)^p`` by zooming grid search."""
    v = np.asarray(normals, float)
    h = np.asarray(h, float)
    # start from the centroid of a rough feasible box
    span = float(np.abs(h).max()) * 4
    center = np.zeros(v.shape[1])
    half = span
    for _ in range(levels):
        axes = [np.linspace(c - half, c + half, width) for c in center]
        G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, v.shape[1])
        d = h[None, :] - G @ v.T
        feas = np.all(d > 0, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(feas, -(np.where(feas[:, None], d, 1.0) ** p @ alpha) / p, np.inf)
        center = G[int(np.argmin(vals))]
        half *= 4.0 / (width - 1)
    return center
