"""Quadrature schemes: direction sets on the sphere and simplex rules."""
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .utils import sphere_area

DEFAULT_DIRECTIONS = {2: 4096, 3: 2048}
MODES = ("lattice", "monte-carlo")


@dataclass(frozen=True)
class QuadratureScheme:
    """Node budgets for the chord quadratures.

    Parameters
    ----------
    dim : int
        Ambient dimension n.
    n_directions : int, optional
        Number M of sphere directions. Defaults to 4096 angles for n=2 and
        2048 spiral points for n=3.
    section_budget : int
        Target number of slices per hyperplane section (n=3). Sections in
        the plane are integrated exactly and ignore this value.
    facet_order : int
        Polynomial degree of the facet quadrature rule.
    seed : int
        Seed for the Monte-Carlo mode.
    mode : {"lattice", "monte-carlo"}
    n_jobs : int
        Worker threads over direction chunks. Chunking and reduction order
        do not depend on it, so results are bit-identical for any value.
    """

    dim: int
    n_directions: Optional[int] = None
    section_budget: int = 64
    facet_order: int = 5
    seed: int = 0
    mode: str = "lattice"
    n_jobs: int = 1

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.n_directions is None:
            object.__setattr__(self, "n_directions", DEFAULT_DIRECTIONS.get(self.dim, 4096))
        if self.n_directions < 16:
            raise ValueError("need at least 16 sphere directions")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.section_budget < 1 or self.facet_order < 0 or self.n_jobs < 1:
            raise ValueError("budgets must be positive")

    @property
    def nodes(self):
        """``(directions, weights)``; weights sum to the area of the sphere."""
        return sphere_nodes(self.dim, self.n_directions, self.mode, self.seed)

    def coarse_mask(self):
        """Boolean mask of the half-budget sub-rule used for error estimates."""
        mask = np.zeros(self.n_directions, dtype=bool)
        if self.mode == "monte-carlo":
            mask[: self.n_directions // 2] = True
        else:
            mask[::2] = True
        return mask

    def to_dict(self):
        return {
            "dim": self.dim,
            "n_directions": self.n_directions,
            "section_budget": self.section_budget,
            "facet_order": self.facet_order,
            "seed": self.seed,
            "mode": self.mode,
        }


@functools.lru_cache(maxsize=32)
def sphere_nodes(dim, n_directions, mode="lattice", seed=0):
    M = n_directions
    area = sphere_area(dim)
    if mode == "monte-carlo" or dim > 3:
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((M, dim))
        u = x / np.linalg.norm(x, axis=1, keepdims=True)
    elif dim == 2:
        theta = 2.0 * np.pi * (np.arange(M) + 0.5) / M
        u = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        i = np.arange(M) + 0.5
        z = 1.0 - 2.0 * i / M
        phi = np.pi * (3.0 - math.sqrt(5.0)) * i
        r = np.sqrt(1.0 - z * z)
        u = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    w = np.full(M, area / M)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def gauss_legendre_unit(k):
    """k-point Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


def segment_rule(order):
    """Nodes in [0, 1] and weights summing to 1, exact to degree ``order``."""
    return gauss_legendre_unit(max(1, (order + 2) // 2))


_A5 = (6.0 - math.sqrt(15.0)) / 21.0
_B5 = (6.0 + math.sqrt(15.0)) / 21.0
_WA5 = (155.0 - math.sqrt(15.0)) / 1200.0
_WB5 = (155.0 + math.sqrt(15.0)) / 1200.0


def triangle_rule(order):
    """Barycentric nodes ``(k, 3)`` and weights summing to 1 on a triangle.

    Symmetric rules for degree <= 5 (centroid, 3-point, 7-point Radon);
    collapsed Gauss-Legendre products above that.
    """
    if order <= 1:
        return np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    if order == 2:
        b = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        return b, np.full(3, 1 / 3)
    if order <= 5:
        b = [[1 / 3, 1 / 3, 1 / 3]]
        w = [9.0 / 40.0]
        for a, wa in ((_A5, _WA5), (_B5, _WB5)):
            c = 1.0 - 2.0 * a
            b += [[c, a, a], [a, c, a], [a, a, c]]
            w += [wa] * 3
        return np.array(b), np.array(w)
    k = order // 2 + 1
    x, wx = gauss_legendre_unit(k + 1)
    y, wy = gauss_legendre_unit(k)
    X, Y = np.meshgrid(x, y, indexing="ij")
    s = X.ravel()
    t = (Y * (1.0 - X)).ravel()
    w = (np.outer(wx * (1.0 - x), wy)).ravel() * 2.0
    b = np.column_stack([1.0 - s - t, s, t])
    return b, w / w.sum()
