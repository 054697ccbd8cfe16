"""Discrete measures on the unit sphere: parsing, validation, sampling."""
import itertools
import json
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._config import EXHAUSTIVE_SUBSETS, SAMPLED_SUBSETS, TOL
from .utils import check_normals, check_weights, max_hemisphere_margin, sphere_area

logger = logging.getLogger(__name__)
_EPS = float(np.finfo(float).eps)


class MeasureError(ValueError):
    """Raised for malformed or invalid measure data."""


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """A finite sum of weighted point masses ``sum_i alpha_i delta_{v_i}``.

    Parameters
    ----------
    normals : ndarray of shape (N, n)
        Unit vectors.
    weights : ndarray of shape (N,)
        Positive masses.
    """

    normals: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        try:
            v = check_normals(self.normals)
            w = check_weights(self.weights, v.shape[0])
        except ValueError as exc:
            raise MeasureError(str(exc)) from None
        n = v.shape[1]
        if v.shape[0] < n + 1:
            raise MeasureError(f"need at least n+1={n + 1} atoms, got {v.shape[0]}")
        i, j = _duplicate_pair(v)
        if i is not None:
            raise MeasureError(f"duplicate normal: atoms {i} and {j}")
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "normals", v)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.normals.shape[1]

    @property
    def n_atoms(self):
        return self.normals.shape[0]

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def to_dict(self):
        return {
            "dim": self.dim,
            "atoms": [
                {"v": [float(x) for x in v], "alpha": float(a)}
                for v, a in zip(self.normals, self.weights)
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _duplicate_pair(v):
    """First pair of rows whose angle is below the duplicate tolerance."""
    if len(v) < 2:
        return None, None
    # chord length rather than 1 - cos, which loses precision at small angles
    d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    idx = np.argwhere(d < TOL.duplicate_angle)
    if len(idx) == 0:
        return None, None
    i, j = idx[0]
    return int(min(i, j)), int(max(i, j))


def _merge_duplicates(v, w):
    keep_v, keep_w = [], []
    for vi, wi in zip(v, w):
        for k, vk in enumerate(keep_v):
            if np.linalg.norm(vi - vk) < TOL.duplicate_angle:
                keep_w[k] += wi
                break
        else:
            keep_v.append(vi)
            keep_w.append(wi)
    return np.array(keep_v), np.array(keep_w)


def parse_measure(text):
    """Parse measure-file contents into a :class:`DiscreteMeasure`.

    The format is a JSON object ``{"dim": n, "atoms": [{"v": [...],
    "alpha": a}, ...]}``. Vectors are normalized; atoms with (numerically)
    the same direction are merged by summing their weights, with a warning.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeasureError(f"malformed measure file: {exc}") from None
    if not isinstance(data, dict) or "atoms" not in data or "dim" not in data:
        raise MeasureError("malformed measure file: expected keys 'dim' and 'atoms'")
    n = data["dim"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise MeasureError(f"malformed measure file: bad dim {n!r}")
    atoms = data["atoms"]
    if not isinstance(atoms, list):
        raise MeasureError("malformed measure file: 'atoms' must be a list")
    vs, ws = [], []
    for k, atom in enumerate(atoms):
        try:
            vec = [float(x) for x in atom["v"]]
            alpha = float(atom["alpha"])
        except (KeyError, TypeError, ValueError):
            raise MeasureError(f"malformed atom #{k}") from None
        if len(vec) != n:
            raise MeasureError(f"atom #{k} has dimension {len(vec)}, expected {n}")
        if not (math.isfinite(alpha) and all(map(math.isfinite, vec))):
            raise MeasureError(f"atom #{k} has non-finite entries")
        if alpha <= 0:
            raise MeasureError(f"non-positive weight in atom #{k}")
        norm = math.sqrt(sum(x * x for x in vec))
        if norm == 0.0:
            raise MeasureError(f"zero vector in atom #{k}")
        # unit input is kept bit-for-bit so that files round-trip exactly
        vs.append(list(vec) if abs(norm - 1.0) <= 4 * _EPS else [x / norm for x in vec])
        ws.append(alpha)
    if not vs:
        raise MeasureError("measure has no atoms")
    v, w = np.array(vs), np.array(ws)
    v_m, w_m = _merge_duplicates(v, w)
    if len(v_m) < len(v):
        msg = f"merged {len(v) - len(v_m)} duplicate normal(s) by summing weights"
        warnings.warn(msg, stacklevel=2)
        logger.warning(msg)
    if len(v_m) <= n:
        raise MeasureError(f"need N > n atoms, got N={len(v_m)} with n={n}")
    return DiscreteMeasure(v_m, w_m)


def load_measure(path):
    with open(path, encoding="utf-8") as fh:
        return parse_measure(fh.read())


@dataclass
class GeneralPositionReport:
    in_general_position: bool
    hemisphere_witness: Optional[np.ndarray] = None
    dependent_subset: Optional[tuple] = None
    min_subset_det: float = math.inf
    hemisphere_margin: float = 0.0
    borderline: bool = False
    exhaustive: bool = True
    n_subsets_checked: int = 0
    seed: Optional[int] = None

    def to_dict(self):
        return {
            "in_general_position": self.in_general_position,
            "hemisphere_witness": None
            if self.hemisphere_witness is None
            else [float(x) for x in self.hemisphere_witness],
            "dependent_subset": None
            if self.dependent_subset is None
            else [int(i) for i in self.dependent_subset],
            "min_subset_det": float(self.min_subset_det),
            "hemisphere_margin": float(self.hemisphere_margin),
            "borderline": self.borderline,
            "exhaustive": self.exhaustive,
            "n_subsets_checked": self.n_subsets_checked,
            "seed": self.seed,
        }


def _subset_dets(v, subsets):
    dets = np.empty(len(subsets))
    chunk = 20_000
    for start in range(0, len(subsets), chunk):
        idx = subsets[start:start + chunk]
        dets[start:start + chunk] = np.abs(np.linalg.det(v[idx]))
    return dets


def validate_general_position(m, det_tol=TOL.det, seed=0):
    """Check the general-position condition for the normals of ``m``.

    The normals must not lie in a closed hemisphere and every n of them
    must be linearly independent. Failures are reported, never raised.

    Parameters
    ----------
    m : DiscreteMeasure or array-like of shape (N, n)
    det_tol : float
        Threshold on ``|det|`` of n-subsets of unit normals.
    seed : int
        Seed for random subset sampling when the exhaustive check is too
        large (more than 1e5 subsets).
    """
    v = m.normals if isinstance(m, DiscreteMeasure) else check_normals(m, normalize=True)
    N, n = v.shape
    report = GeneralPositionReport(in_general_position=True)

    n_comb = math.comb(N, n)
    if n_comb <= EXHAUSTIVE_SUBSETS:
        subsets = np.array(list(itertools.combinations(range(N), n)), dtype=np.intp)
        report.exhaustive = True
    else:
        parts = []
        for k in (2, 3):
            if k < n and math.comb(N, k) <= 10 * EXHAUSTIVE_SUBSETS:
                # a dependent k-subset extends to a dependent n-subset
                for comb in itertools.combinations(range(N), k):
                    rest = [i for i in range(N) if i not in comb][: n - k]
                    parts.append(list(comb) + rest)
        rng = np.random.default_rng(seed)
        sampled = _distinct_rows(rng, N, n, SAMPLED_SUBSETS)
        subsets = np.vstack([np.array(parts, dtype=np.intp).reshape(-1, n), sampled])
        report.exhaustive = False
        report.seed = seed
    dets = _subset_dets(v, subsets)
    report.n_subsets_checked = len(subsets)
    k_min = int(np.argmin(dets))
    report.min_subset_det = float(dets[k_min])
    if dets[k_min] <= det_tol:
        report.dependent_subset = tuple(int(i) for i in subsets[k_min])
        report.in_general_position = False

    margin, w = max_hemisphere_margin(v)
    report.hemisphere_margin = margin
    if margin > TOL.hemisphere_margin:
        w = w / np.linalg.norm(w)
        report.hemisphere_witness = w
        report.in_general_position = False
    # a closed-but-not-open hemisphere forces n dependent normals, which the
    # subset test reports; near misses on either test are only flagged
    near_hemisphere = 0.0 < margin < 10 * TOL.hemisphere_margin
    near_dependent = det_tol < report.min_subset_det < 10 * det_tol
    report.borderline = near_hemisphere or near_dependent
    return report


def _distinct_rows(rng, N, n, count):
    """``count`` sorted index rows, each ``n`` distinct draws from ``range(N)``."""
    rows = np.empty((0, n), dtype=np.intp)
    while len(rows) < count:
        draw = np.sort(rng.integers(0, N, size=(2 * (count - len(rows)), n)), axis=1)
        ok = np.all(np.diff(draw, axis=1) > 0, axis=1)
        rows = np.vstack([rows, draw[ok]])
    return rows[:count]


def sample_general_position(n, N, seed, max_attempts=100):
    """Draw ``N`` uniform directions on ``S^{n-1}`` in general position.

    Weights are all one. Deterministic in ``seed``.
    """
    if n < 2:
        raise MeasureError("dimension must be >= 2")
    if N <= n:
        raise MeasureError(f"need N > n, got N={N}, n={n}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        x = rng.standard_normal((N, n))
        v = x / np.linalg.norm(x, axis=1, keepdims=True)
        if validate_general_position(v, seed=seed).in_general_position:
            return DiscreteMeasure(v, np.ones(N))
    raise MeasureError(f"no general-position sample after {max_attempts} attempts")


def discretize_density(f: Callable, n, N, seed):
    """Approximate the measure with density ``f`` by ``N`` weighted atoms.

    Atoms sit at random general-position directions; each carries
    ``f(v_i) * |S^{n-1}| / N`` so that the total mass approximates the
    integral of ``f``.
    """
    base = sample_general_position(n, N, seed)
    vals = np.array([float(f(v)) for v in base.normals])
    if not np.all(np.isfinite(vals)):
        raise MeasureError("density returned a non-finite value")
    if np.any(vals <= 0):
        raise MeasureError("density must be positive")
    return DiscreteMeasure(base.normals, vals * (sphere_area(n) / N))
