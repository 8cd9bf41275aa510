import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from katolab import oracles
from katolab import semigroup as sg
from katolab.fields import random_bumps
from katolab.geometry import diameter
from katolab.spectrum import (DirichletBall, NeumannBall, c_n_nu, check_ground_state_bound,
                              eigs, ground_state_schrodinger, lambda_1, oscillation_suite,
                              p_mean_norm, rayleigh_quotient)

from conftest import TORUS, gaussian_bump, mesh_for, rel

J01 = 2.404825557695773
DJ11 = 1.8411837813406593


# -- analytic spectra ------------------------------------------------------------

def test_torus_spectrum(torus):
    res = eigs(torus, "closed", k=6)
    lam = res.eigenvalues
    assert abs(lam[0]) <= 1e-8
    assert np.all(np.abs(lam[1:5] - 1.0) <= 0.02)  # multiplicity 4
    assert lam[5] > 1.5
    assert np.all(np.diff(lam) >= 0)
    assert res.residuals.max() <= 1e-8


def test_sphere_spectrum(sphere):
    res = eigs(sphere, "closed", k=5)
    assert np.all(np.abs(res.eigenvalues[1:4] - 2.0) <= 0.04)  # multiplicity 3
    assert res.eigenvalues[4] > 4.0
    assert res.residuals.max() <= 1e-8


def test_disk_neumann(disk):
    res = eigs(disk, "neumann", k=3)
    assert abs(res.eigenvalues[0]) <= 1e-8
    assert rel(res.first_nonzero, DJ11 ** 2) <= 0.02
    assert rel(DJ11 ** 2, 3.390) <= 1e-3


def test_dirichlet_ball_on_torus(torus):
    R = 1.2
    res = eigs(torus, DirichletBall(0, R), k=2)
    assert rel(res.first_nonzero, J01 ** 2 / R ** 2) <= 0.03
    assert rel(J01 ** 2, 5.7832) <= 1e-4


def test_eigs_errors(coarse_torus, coarse_disk):
    with pytest.raises(ValueError):
        eigs(coarse_torus, "neumann")
    with pytest.raises(ValueError):
        eigs(coarse_disk, "closed")
    with pytest.raises(ValueError):
        eigs(coarse_torus, DirichletBall(0, 0.2))
    with pytest.raises(ValueError):
        eigs(coarse_torus, "robin")


def test_eigenvector_orthonormality(coarse_sphere):
    res = eigs(coarse_sphere, "closed", k=8, method="sparse")
    Phi = res.eigenvectors
    G = Phi.T @ (coarse_sphere.mass[:, None] * Phi)
    assert np.max(np.abs(G - np.eye(8))) <= 1e-8
    # constant ground mode
    assert np.ptp(Phi[:, 0]) <= 1e-8 * np.max(np.abs(Phi[:, 0]))


def test_sparse_matches_dense(coarse_torus):
    a = eigs(coarse_torus, "closed", k=6, method="sparse").eigenvalues
    b = eigs(coarse_torus, "closed", k=6, method="dense").eigenvalues
    assert np.max(np.abs(a - b)) <= 1e-8 * b[1]
    assert np.max(np.abs(b - np.linalg.eigvalsh(oracles.symmetric_generator(coarse_torus))[:6])) \
        <= 1e-8 * b[1]


def test_eigs_deterministic(coarse_sphere):
    a = eigs(coarse_sphere, "closed", k=4, method="sparse", seed=3)
    b = eigs(coarse_sphere, "closed", k=4, method="sparse", seed=3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_domain_monotonicity(torus):
    lams = [eigs(torus, DirichletBall(0, R), k=1).first_nonzero for R in (0.6, 0.9, 1.2, 1.5)]
    assert all(b <= a for a, b in zip(lams, lams[1:]))


def test_neumann_ball_below_dirichlet(torus):
    for R in (0.8, 1.4):
        neu = eigs(torus, NeumannBall(0, R), k=2).first_nonzero
        dir_ = eigs(torus, DirichletBall(0, R), k=1).first_nonzero
        assert neu <= dir_


def test_rayleigh_consistency(coarse_torus):
    m = coarse_torus
    lam1 = lambda_1(m)
    rng = np.random.default_rng(0)
    for _ in range(50):
        f = rng.standard_normal(m.N)
        f -= (m.mass @ f) / m.volume
        assert rayleigh_quotient(m, f) >= lam1 - 1e-8
    phi = eigs(m, "closed", k=2).eigenvectors[:, 1]
    assert abs(rayleigh_quotient(m, phi) - lam1) <= 1e-8


def test_spectral_csv(coarse_disk):
    text = eigs(coarse_disk, "neumann", k=3).to_csv()
    lines = text.splitlines()
    assert lines[0] == "index,eigenvalue,residual" and len(lines) == 4
    assert lines[2].startswith("1,")


# -- ground state --------------------------------------------------------------------

def test_ground_state_zero(coarse_torus):
    gs = ground_state_schrodinger(coarse_torus, np.zeros(coarse_torus.N))
    assert abs(gs.sigma_tilde) <= 1e-10
    assert np.allclose(gs.w, 1.0, atol=1e-10)
    assert gs.w_bar == pytest.approx(1.0, abs=1e-10)


def test_ground_state_constant_is_tight(coarse_sphere):
    v = 0.4
    V = np.full(coarse_sphere.N, v)
    gs = ground_state_schrodinger(coarse_sphere, V)
    assert abs(gs.sigma_tilde - v) <= 1e-8
    assert np.allclose(gs.w, 1.0, atol=1e-8)
    for a in (0.5, 1.0, 3.0):
        assert a * sg.c_alpha(coarse_sphere, V, a) == pytest.approx(v, abs=1e-10)
    outs = check_ground_state_bound(coarse_sphere, V, alpha=1.0)
    assert [o.status for o in outs] == ["pass", "pass"]


def test_ground_state_bump(coarse_torus):
    m = coarse_torus
    V = gaussian_bump(m, 3, 1.0, 0.5)
    gs = ground_state_schrodinger(m, V)
    s, w = oracles.ground_state(m, V)
    assert abs(gs.sigma_tilde - s) <= 1e-8
    assert np.all(gs.w > 0)
    assert (m.mass @ gs.w ** 2) / m.volume == pytest.approx(1.0, abs=1e-10)
    a = 1.0 / diameter(m) ** 2
    assert 0 <= gs.sigma_tilde <= a * sg.c_alpha(m, V, a)
    assert all(o.status == "pass" for o in check_ground_state_bound(m, V, alpha=a))


def test_ground_state_monotone(coarse_sphere):
    rng = np.random.default_rng(4)
    for _ in range(5):
        V = rng.random(coarse_sphere.N)
        a = ground_state_schrodinger(coarse_sphere, V).sigma_tilde
        b = ground_state_schrodinger(coarse_sphere, 1.1 * V).sigma_tilde
        assert b >= a - 1e-10


def test_ground_state_rejects_negative(coarse_sphere):
    with pytest.raises(ValueError):
        ground_state_schrodinger(coarse_sphere, -np.ones(coarse_sphere.N))


# -- oscillation inequalities --------------------------------------------------------

def _passed(outs):
    return {o.name: o.status in ("pass", "constant_calibrated") for o in outs}


def test_oscillation_zero_potential(coarse_torus):
    D = diameter(coarse_torus)
    outs = oscillation_suite(coarse_torus, np.zeros(coarse_torus.N), 1 / D ** 2, D ** 2)
    assert len(outs) == 6 and all(_passed(outs).values())
    for o in outs:
        if o.name != "oscillation.wbar_half":
            assert abs(o.lhs) <= 1e-10


def test_oscillation_constant_potential(coarse_torus):
    a = 1.0
    V = np.full(coarse_torus.N, 0.3)  # v / a < 1
    outs = oscillation_suite(coarse_torus, V, a, 20.0)
    byname = {o.name: o for o in outs}
    for k in ("form_bound", "gradient_bound", "two_norm", "poincare"):
        assert byname["oscillation." + k].status == "pass"
    assert byname["oscillation.two_norm"].lhs <= 1e-16


def test_oscillation_bumps(coarse_torus):
    m = coarse_torus
    D = diameter(m)
    a = 1 / D ** 2
    for V in random_bumps(m, 10, seed=1):
        V = V * 0.1 / sg.c_alpha(m, V, a)
        outs = oscillation_suite(m, V, a, D ** 2)
        assert all(o.status != "hypothesis_not_met" for o in outs)
        assert all(_passed(outs).values()), [o.to_record() for o in outs if o.failed]


def test_oscillation_gate(coarse_torus):
    V = np.full(coarse_torus.N, 2.0)
    outs = oscillation_suite(coarse_torus, V, 1.0, 1.0)
    statuses = {o.name: o.status for o in outs}
    assert statuses["oscillation.form_bound"] == "hypothesis_not_met"
    assert statuses["oscillation.poincare"] == "pass"


def test_c_n_nu():
    assert c_n_nu(4.0) == pytest.approx(8.0 ** 2.5)
    assert c_n_nu(4.0, 4.0) == pytest.approx(2 * 8.0 ** 2.5)


# -- normalized p-norms --------------------------------------------------------------

def test_p_mean_norm(coarse_torus):
    m = coarse_torus
    for p in (1, 2, 3.5):
        assert p_mean_norm(m, np.full(m.N, -2.0), p) == pytest.approx(2.0, rel=1e-12)
    half = (m.coords[:, 0] < math.pi).astype(float) if m.coords.shape[1] >= 1 else None
    assert abs(p_mean_norm(m, half, 1) - 0.5) <= 0.02
    with pytest.raises(ValueError):
        p_mean_norm(m, half, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_p_mean_norm_jensen(seed):
    m = mesh_for(TORUS, 0.45)
    f = np.random.default_rng(seed).standard_normal(m.N)
    assert p_mean_norm(m, f, 1) <= p_mean_norm(m, f, 2) * (1 + 1e-12)
