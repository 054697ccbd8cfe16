"""Tolerance constants shared by the geometry, quadrature and solver code."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    unit_norm: float = 1e-12
    duplicate_angle: float = 1e-9
    det: float = 1e-10
    hemisphere_margin: float = 1e-9
    # vertex feasibility, relative to max(1, R)
    vertex: float = 1e-9
    # facet is active iff area > facet_area * R**(n-1)
    facet_area: float = 1e-12
    # max inscribed radius below this means empty interior
    empty_interior: float = 1e-12
    closedness: float = 1e-8
    # below this |v_i . u| a facet is treated as parallel to u
    parallel: float = 1e-12


TOL = Tolerances()

# exhaustive n-subset determinant check up to this many subsets
EXHAUSTIVE_SUBSETS = 100_000
SAMPLED_SUBSETS = 100_000
# vertex enumeration by n-subsets up to this many constraints
SUBSET_ENUMERATION_MAX_N = 60
