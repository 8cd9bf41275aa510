"""Model surfaces, their discretization and metric quantities."""
from .spec import (
    FAMILIES,
    ManifoldSpec,
    SpecError,
    flat_torus,
    planar_annulus,
    planar_disk,
    round_sphere,
    spherical_cap,
    surface_of_revolution,
)
from .mesh import DiscreteManifold, build_manifold, default_resolution
from .metric import (
    SamplingPlan,
    ball_volume,
    diameter,
    diameter_info,
    distances_from,
    doubling_ratio,
    geodesic_distance,
    sampling_plan,
)
from .curvature import (
    BoundaryGeometry,
    boundary_geometry,
    gauss_curvature,
    ricci_lower_field,
    rho_minus,
)
from .meshio import read_field, read_mesh, write_field, write_mesh

__all__ = [
    "FAMILIES", "ManifoldSpec", "SpecError", "flat_torus", "planar_annulus", "planar_disk",
    "round_sphere", "spherical_cap", "surface_of_revolution", "DiscreteManifold",
    "build_manifold", "default_resolution", "SamplingPlan", "ball_volume", "diameter",
    "diameter_info", "distances_from", "doubling_ratio", "geodesic_distance",
    "sampling_plan", "BoundaryGeometry", "boundary_geometry", "gauss_curvature",
    "ricci_lower_field", "rho_minus", "read_field", "read_mesh", "write_field", "write_mesh",
]
