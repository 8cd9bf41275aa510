import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from katolab.geometry import (ManifoldSpec, SpecError, ball_volume, boundary_geometry,
                              build_manifold, diameter, doubling_ratio, flat_torus,
                              geodesic_distance, planar_annulus, planar_disk, read_field,
                              read_mesh, ricci_lower_field, rho_minus, round_sphere,
                              sampling_plan, spherical_cap, surface_of_revolution,
                              write_field, write_mesh)
from katolab.geometry.mesh import DiscreteManifold
from katolab import semigroup as sg

from conftest import ANNULUS, CAP, DISK, HEMISPHERE, SPHERE, TORUS, mesh_for, rel

DUMBBELL = "surface_of_revolution:profile=sin(t)-0.6*sin(t)**3;length=pi;kind=closed"


# -- specs ---------------------------------------------------------------------

def test_spec_round_trip():
    for s in (TORUS, SPHERE, DISK, ANNULUS, CAP, DUMBBELL):
        spec = ManifoldSpec.from_string(s)
        assert ManifoldSpec.from_string(spec.to_string()) == spec


@pytest.mark.parametrize("bad", [
    lambda: round_sphere(-1.0),
    lambda: flat_torus(0.0, 1.0),
    lambda: planar_annulus(2.0, 1.0),
    lambda: spherical_cap(1.0, math.pi),
    lambda: surface_of_revolution("t", 1.0, "closed"),  # no pole closure at t = length
    lambda: ManifoldSpec.from_string("klein_bottle:a=1"),
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(SpecError):
        bad()


def test_coarse_resolution_rejected():
    with pytest.raises(SpecError):
        build_manifold(round_sphere(), 3.0)


# -- assembly ------------------------------------------------------------------

@pytest.mark.parametrize("spec, area", [
    (flat_torus(), 4 * math.pi ** 2), (round_sphere(), 4 * math.pi), (planar_disk(), math.pi)])
def test_mass_sums_to_area(spec, area):
    m = build_manifold(spec, 0.1)
    assert rel(m.mass.sum(), area) <= 0.01
    assert m.closed == (spec.family != "planar_disk")
    assert (m.boundary.size > 0) == (spec.family == "planar_disk")


@pytest.mark.parametrize("s", [TORUS, SPHERE, DISK, ANNULUS, CAP, DUMBBELL])
def test_stiffness_identities(s):
    m = mesh_for(s, 0.2)
    K = m.stiffness
    assert abs(K - K.T).max() == 0.0
    # stiffness annihilates constants up to roundoff of the row sums
    assert np.max(np.abs(K @ np.ones(m.N))) <= 1e-12 * abs(K).max()
    assert np.all(m.mass > 0)
    off = K.copy()
    off.setdiag(0)
    assert off.max() <= 0.0  # M-matrix mode
    rng = np.random.default_rng(1)
    F = rng.standard_normal((m.N, 100))
    assert np.min(np.einsum("ij,ij->j", F, K @ F)) >= -1e-12


def test_backward_euler_preserves_positivity(coarse_sphere):
    rng = np.random.default_rng(2)
    plan = sg.PropagationPlan(scheme="backward_euler", steps_per_unit=50, min_steps=5)
    prop = sg.Propagator(coarse_sphere)
    for _ in range(100):
        f = rng.random(coarse_sphere.N) * (rng.random(coarse_sphere.N) < 0.3)
        u = prop.run(f, [0.1], plan)[0]
        assert u.min() >= 0.0


# -- curvature -----------------------------------------------------------------

def test_curvature_fields():
    s = round_sphere()
    assert np.allclose(ricci_lower_field(s, mesh_for(SPHERE, 0.3)), 1.0, atol=1e-12)
    assert np.all(ricci_lower_field(flat_torus(), mesh_for(TORUS, 0.45)) == 0.0)
    cosh = surface_of_revolution("cosh(t)", 1.0, "two_boundaries")
    m = build_manifold(cosh, 0.2)
    rho = ricci_lower_field(cosh, m)
    assert np.allclose(rho, -1.0, atol=1e-12)
    assert np.allclose(rho_minus(rho), 1.0)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=50))
def test_rho_minus_is_negative_part(values):
    r = rho_minus(values)
    assert np.all(r >= 0)
    assert np.array_equal(r, np.maximum(0.0, -np.asarray(values)))


# -- distances -------------------------------------------------------------------

def test_diameters(torus, sphere):
    assert rel(diameter(sphere), math.pi) <= 0.03
    assert rel(diameter(torus), math.pi * math.sqrt(2)) <= 0.03
    assert geodesic_distance(sphere, 5, 5) == 0.0


def test_distance_symmetry_and_triangle(coarse_sphere):
    m = coarse_sphere
    rng = np.random.default_rng(3)
    for _ in range(20):
        i, j, k = rng.integers(m.N, size=3)
        dij = geodesic_distance(m, i, j)
        assert dij == pytest.approx(geodesic_distance(m, j, i), rel=0.02, abs=0.02)
        assert dij <= geodesic_distance(m, i, k) + geodesic_distance(m, k, j) + 0.05


def test_ball_volume(torus, sphere):
    x = 100
    assert rel(ball_volume(torus, x, 0.5), math.pi * 0.25) <= 0.05
    assert rel(ball_volume(sphere, 7, math.pi), 4 * math.pi) <= 0.01
    assert ball_volume(sphere, 7, 0.0) == sphere.mass[7]
    r = np.linspace(0, diameter(sphere), 50)
    v = ball_volume(sphere, 7, r)
    assert np.all(np.diff(v) >= 0)
    assert v[-1] == pytest.approx(sphere.mass.sum(), rel=1e-12)


# -- boundary geometry -------------------------------------------------------------

def test_boundary_geometry_examples():
    d = boundary_geometry(planar_disk())
    assert d.H == 0 and d.K_R == 0 and d.admissible
    for R in (0.1, 0.5, 1.0):
        assert boundary_geometry(planar_disk(), R).admissible
    h = boundary_geometry(spherical_cap(1.0, math.pi / 2))
    assert abs(h.H) < 1e-12 and h.K_R == pytest.approx(1.0)
    assert h.R == pytest.approx(math.atan(0.5), rel=1e-9)
    assert boundary_geometry(planar_annulus(1.0, 2.0)).H == pytest.approx(1.0)


# -- doubling ------------------------------------------------------------------------

def test_doubling_ratio(torus, sphere):
    nu = 2 * math.e ** 2
    assert doubling_ratio(torus, nu, sampling_plan(torus)) <= 1.1
    c = doubling_ratio(sphere, nu, sampling_plan(sphere))
    assert math.isfinite(c) and c > 0
    # a single radius compares each ball with itself
    from katolab.geometry import SamplingPlan
    assert doubling_ratio(sphere, nu, SamplingPlan((0, 3), (0.5,))) == 1.0


# -- refinement ---------------------------------------------------------------------

@pytest.mark.parametrize("s, hs", [(SPHERE, (0.4, 0.2, 0.1, 0.05)),
                                   (DISK, (0.2, 0.1, 0.05, 0.025)),
                                   (HEMISPHERE, (0.3, 0.15, 0.075, 0.0375))])
def test_area_and_diameter_converge(s, hs):
    spec = ManifoldSpec.from_string(s)
    meshes = [build_manifold(spec, h) for h in hs]
    va = [rel(m.volume, spec.volume()) for m in meshes]
    for a, b in zip(va, va[1:]):
        assert b <= 1.1 * a
    D = spec.diameter()
    if D is not None:
        dd = [rel(diameter(m), D) for m in meshes[:3]]
        assert dd[-1] <= dd[0]


# -- file format --------------------------------------------------------------------

@pytest.mark.parametrize("s", [TORUS, DISK, CAP])
def test_mesh_round_trip_is_bit_exact(tmp_path, s):
    m = mesh_for(s, 0.3)
    p = tmp_path / "m.txt"
    write_mesh(m, p)
    r = read_mesh(p)
    assert isinstance(r, DiscreteManifold)
    for a in ("mass", "edges", "edge_lengths", "edge_weights", "faces", "face_lengths",
              "boundary", "coords"):
        assert np.array_equal(getattr(m, a), getattr(r, a)), a
    assert r.digest == m.digest
    assert r.spec == m.spec
    assert (r.stiffness != m.stiffness).nnz == 0


def test_field_round_trip(tmp_path, coarse_torus):
    f = np.random.default_rng(0).standard_normal(coarse_torus.N)
    write_field(tmp_path / "f.txt", f)
    assert np.array_equal(read_field(tmp_path / "f.txt"), f)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0))
def test_torus_mass_exact(L1, L2):
    m = build_manifold(flat_torus(L1, L2), min(L1, L2) / 10)
    assert m.volume == pytest.approx(L1 * L2, rel=1e-12)
