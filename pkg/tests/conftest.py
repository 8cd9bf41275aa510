import functools
import math

import numpy as np
import pytest

from katolab.geometry import ManifoldSpec, build_manifold


@functools.lru_cache(maxsize=None)
def mesh_for(spec: str, h=None):
    """Meshes are shared between tests; checks only read them (and fill caches)."""
    return build_manifold(ManifoldSpec.from_string(spec), h)


TORUS = "flat_torus:L1=2*pi;L2=2*pi"
THIN_TORUS = "flat_torus:L1=2*pi;L2=0.2*pi"
SPHERE = "round_sphere:radius=1"
DISK = "planar_disk:radius=1"
ANNULUS = "planar_annulus:r_in=0.5;r_out=1"
HEMISPHERE = "spherical_cap:sphere_radius=1;polar_angle=pi/2"
CAP = "spherical_cap:sphere_radius=1;polar_angle=2"
COSH = "surface_of_revolution:profile=cosh(t);length=2;kind=two_boundaries"


@pytest.fixture(scope="session")
def coarse_torus():
    return mesh_for(TORUS, 0.45)


@pytest.fixture(scope="session")
def coarse_sphere():
    return mesh_for(SPHERE, 0.3)


@pytest.fixture(scope="session")
def coarse_disk():
    return mesh_for(DISK, 0.15)


@pytest.fixture(scope="session")
def torus():
    return mesh_for(TORUS)


@pytest.fixture(scope="session")
def sphere():
    return mesh_for(SPHERE)


@pytest.fixture(scope="session")
def disk():
    return mesh_for(DISK)


def gaussian_bump(mesh, x=0, width=1.0, amplitude=1.0):
    from katolab.fields import bump
    return bump(mesh, x, width, amplitude)


def rel(a, b):
    return abs(a - b) / abs(b)
