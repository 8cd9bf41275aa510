"""End-to-end acceptance suite: one test per criterion, each printing a
single pass/fail line at the end of the module."""
import csv
import functools
import io
import pathlib
import time
from fractions import Fraction

import numpy as np
import pytest

from katolab import estimates as est
from katolab import semigroup as sg
from katolab.fields import random_bumps
from katolab.geometry import ManifoldSpec, build_manifold, diameter
from katolab.harness import load_config, run_experiment
from katolab.harness.cli import EXIT_OK, main
from katolab.harness.runner import oracle_compare, report_files
from katolab.outcome import CALIBRATED, HYPOTHESIS_NOT_MET, PASS
from katolab.spectrum import DirichletBall, eigs, ground_state_schrodinger, oscillation_suite

from conftest import ANNULUS, CAP, DISK, SPHERE, THIN_TORUS, TORUS, gaussian_bump, mesh_for, rel

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"
OK = (PASS, CALIBRATED)
J01_SQ = 5.7832
ETA1_DISK = 3.390

LINES = {}


@pytest.fixture(scope="module", autouse=True)
def report_lines(request):
    yield
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    write = tr.write_line if tr is not None else print
    write("")
    for n in sorted(LINES):
        write(LINES[n])


def record(n, ok, text):
    LINES[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
    assert ok, LINES[n]


def _all_ok(outs):
    return all(o.status in OK for o in outs)


@functools.lru_cache(maxsize=None)
def _sweep(name):
    rep = run_experiment(load_config(CONFIGS / name))
    rows = list(csv.DictReader(io.StringIO(report_files(rep)["convergence.csv"])))
    return rep, rows


def _nonincreasing(xs):
    return all(b <= a for a, b in zip(xs, xs[1:]))


# -- 1 -----------------------------------------------------------------------------

def _timed_eigs(spec, domain, k):
    t0 = time.perf_counter()
    m = build_manifold(ManifoldSpec.from_string(spec))
    res = eigs(m, domain, k=k)
    return m, res, time.perf_counter() - t0


def test_criterion_1_analytic_spectra():
    parts, ok = [], True
    _, r, dt = _timed_eigs(TORUS, "closed", 6)
    lam = r.eigenvalues
    good = np.all(np.abs(lam[1:5] - 1.0) <= 0.02) and lam[5] > 1.5 and dt <= 60
    parts.append(f"torus lambda_1..4 in [{lam[1]:.4f}, {lam[4]:.4f}] ({dt:.1f}s)")
    ok &= bool(good)

    _, r, dt = _timed_eigs(SPHERE, "closed", 5)
    lam = r.eigenvalues
    good = np.all(np.abs(lam[1:4] - 2.0) <= 0.04) and rel(lam[1], 2.0) <= 0.02 \
        and lam[4] > 4.0 and dt <= 60
    parts.append(f"sphere lambda_1..3 in [{lam[1]:.4f}, {lam[3]:.4f}] ({dt:.1f}s)")
    ok &= bool(good)

    _, r, dt = _timed_eigs(DISK, "neumann", 3)
    eta = r.first_nonzero
    ok &= rel(eta, ETA1_DISK) <= 0.02 and dt <= 60
    parts.append(f"disk eta_1={eta:.4f} ({dt:.1f}s)")

    R = 1.2
    t0 = time.perf_counter()
    m = build_manifold(ManifoldSpec.from_string(TORUS))
    lam_d = eigs(m, DirichletBall(0, R), k=1).first_nonzero
    dt = time.perf_counter() - t0
    ok &= rel(lam_d * R * R, J01_SQ) <= 0.03 and dt <= 60
    parts.append(f"Dirichlet ball lambda_1 R^2={lam_d * R * R:.4f} ({dt:.1f}s)")
    record(1, bool(ok), "; ".join(parts))


# -- 2 -----------------------------------------------------------------------------

def test_criterion_2_kato_calculators(coarse_torus, coarse_disk, torus):
    err_const = 0.0
    for m in (coarse_torus, coarse_disk, torus):
        for v, T, a in ((0.3, 1.0, 2.0), (2.0, 0.25, 0.5), (1.0, 3.0, 1.0)):
            V = np.full(m.N, v)
            err_const = max(err_const, abs(sg.kappa(m, V, T) - v * T),
                            abs(sg.c_alpha(m, V, a) - v / a))
    Vs = random_bumps(torus, 20, seed=5)
    ks = sg.kappa_many(torus, Vs, 1.0)
    bridge = [sg.kappa_c_bridge(torus, V, 1.0, 1.0, tolerance=1e-6, kappa_beta=k)
              for V, k in zip(Vs, ks)]
    n_bridge = sum(o.status == PASS for o in bridge)
    err_lin = 0.0
    for m in (coarse_torus, coarse_disk):
        V = gaussian_bump(m, 7, 0.8, 1.3)
        k = sg.kappa(m, V, 1.0)
        for s in (0.1, 0.5, 2.0, 10.0):
            err_lin = max(err_lin, abs(sg.kappa(m, s * V, 1.0) - s * k) / max(1.0, s * k))
    ok = err_const <= 1e-10 and n_bridge == 20 and err_lin <= 1e-10
    record(2, ok, f"constant-V error {err_const:.1e}; bridge {n_bridge}/20; "
                  f"linearity error {err_lin:.1e}")


# -- 3 -----------------------------------------------------------------------------

def test_criterion_3_oracle_equivalence(coarse_torus, coarse_sphere):
    t0 = time.perf_counter()
    meshes = (coarse_torus, coarse_sphere, mesh_for(DISK, 0.2))
    worst = {"ops": 0.0, "eigs": 0.0}
    ok = True
    for m in meshes:
        ok &= m.N <= 300
        rows = oracle_compare(m, 1.0, V=gaussian_bump(m, 0, 1.0))
        for r in rows:
            ok &= bool(r["ok"])
            key = "eigs" if r["operation"] == "eigs" else "ops"
            worst[key] = max(worst[key], r["error"])
    dt = time.perf_counter() - t0
    ok &= worst["ops"] <= 1e-6 and worst["eigs"] <= 1e-8 and dt <= 30
    record(3, bool(ok), f"N={[m.N for m in meshes]}; worst operator error {worst['ops']:.1e}; "
                        f"worst eigenvalue error {worst['eigs']:.1e} ({dt:.1f}s)")


# -- 4 -----------------------------------------------------------------------------

def test_criterion_4_zhong_yang():
    ok, parts = True, []
    for name, spec, ratio in (("square", TORUS, 2.0), ("thin", THIN_TORUS, 1.01)):
        o = est.check_zhong_yang(mesh_for(spec))
        ok &= o.status == PASS and o.rhs >= 0.95 and rel(o.rhs, ratio) <= 0.03
        parts.append(f"{name} lambda_1 D^2/pi^2={o.rhs:.4f}")
    record(4, bool(ok), "; ".join(parts))


# -- 5 -----------------------------------------------------------------------------

def test_criterion_5_cheng(torus, sphere):
    ok, parts = True, []
    for name, m in (("torus", torus), ("sphere", sphere)):
        o = est.check_cheng(m)
        ok &= o.status == PASS and o.margin > 0
        parts.append(f"{name} lambda_1={o.lhs:.4f} <= {o.rhs:.4f}")
    record(5, bool(ok), "; ".join(parts))


# -- 6 -----------------------------------------------------------------------------

def test_criterion_6_li_yau_harnack(torus, sphere):
    ok, parts = True, []
    for name, m in (("torus", torus), ("sphere", sphere)):
        ly = est.check_li_yau_closed(m, t_grid=(0.1, 0.25, 0.5, 1.0), slack=0.1)
        hn = est.check_harnack_closed(m, n_tuples=256, slack=0.1)
        n_ly = sum(o.samples for o in ly)
        n_hn = sum(o.samples for o in hn)
        ok &= _all_ok(ly) and _all_ok(hn) and n_ly >= 200 and n_hn >= 200
        parts.append(f"{name} Li-Yau {n_ly} and Harnack {n_hn} tuples")

    for cfg in ("sphere_sweep.toml", "torus_sweep.toml"):
        rep, rows = _sweep(cfg)
        ly = [r for r in rows if r["check"] == "li_yau_closed"]
        hn = [r for r in rows if r["check"] == "harnack_closed"]
        defect = [float(r["defect"]) for r in ly]
        slack = [float(r["needed_slack"]) for r in ly + hn]
        ok &= rep.exit_code == 0 and len(ly) == 3 and _nonincreasing(defect) \
            and defect[-1] < defect[0] and max(slack) <= 0.1
        parts.append(f"{cfg.split('_')[0]} defect " + " > ".join(f"{d:.3g}" for d in defect))

    for name, spec in (("disk", DISK), ("annulus", ANNULUS), ("cap", CAP)):
        m = mesh_for(spec)
        pairs = [(int(x), int(y), 0.2, 0.4)
                 for x, y in np.random.default_rng(1).integers(m.N, size=(100, 2))]
        outs = est.check_li_yau_neumann(m) + est.check_harnack_neumann(m, pairs=pairs)
        ok &= _all_ok(outs)
    parts.append("Neumann analogues on disk, annulus, cap")
    record(6, bool(ok), "; ".join(parts))


# -- 7 -----------------------------------------------------------------------------

def test_criterion_7_J_solvers(coarse_disk, coarse_torus, coarse_sphere):
    m = coarse_disk
    err_par = 0.0
    for r, c in ((0.02, 4.0), (0.005, 2.5)):
        sol = sg.solve_J_parabolic(m, np.full(m.N, r), c, 1.0)
        err_par = max(err_par, float(np.max(np.abs(sol.J - np.exp(-2 * r * sol.times)[:, None]))))

    cst = est.neumann_constants(2, 0.0, 0.5)
    r_gate = 1 / (2 * (float(cst.c_J) - 1))
    bracket = [est.check_J_bracket(m)]
    for i, x in enumerate(np.random.default_rng(2).integers(m.N, size=5)):
        rho = gaussian_bump(m, int(x), 0.3, 1.0)
        rho *= (0.2 + 0.15 * i) * r_gate / sg.kappa(m, rho, 1.0)
        bracket.append(est.check_J_bracket(m, rho_minus=rho))
    n_bracket = sum(o.status == PASS for o in bracket)

    n_gated, worst = 0, 0.0
    delta = 0.1
    ok_ell = True
    for mm in (coarse_torus, coarse_sphere):
        D = diameter(mm)
        gate = est.check_aux_J(mm, delta=delta).details["gate"]
        for x in (0, mm.N // 3):
            rho = gaussian_bump(mm, x, 1.0)
            rho /= sg.kappa(mm, rho, D * D)
            for s in (0.1, 0.5, 0.9, 2.0):
                o = est.check_aux_J(mm, delta=delta, rho_minus=s * gate * rho)
                if o.status == HYPOTHESIS_NOT_MET:
                    continue
                n_gated += 1
                worst = max(worst, o.lhs)
                ok_ell &= o.lhs <= delta
    ok = err_par <= 1e-6 and n_bracket == len(bracket) and ok_ell and n_gated > 0
    record(7, bool(ok), f"parabolic error {err_par:.1e}; bracket {n_bracket}/{len(bracket)}; "
                        f"elliptic max|J-1|={worst:.2e} <= {delta} on {n_gated} gated cases")


# -- 8 -----------------------------------------------------------------------------

def test_criterion_8_ground_state(coarse_torus, coarse_sphere):
    ok = True
    tight = 0.0
    for m in (coarse_torus, coarse_sphere):
        a = 1.0 / diameter(m) ** 2
        # the bound needs c_alpha(V) < 1
        for V, c in zip(random_bumps(m, 6, seed=7), (0.1, 0.5, 0.9) * 2):
            V = V * c / sg.c_alpha(m, V, a)
            s = ground_state_schrodinger(m, V).sigma_tilde
            ok &= -1e-10 <= s <= a * sg.c_alpha(m, V, a) * (1 + 1e-10)
        V = np.full(m.N, 0.4)
        s = ground_state_schrodinger(m, V).sigma_tilde
        tight = max(tight, abs(s - a * sg.c_alpha(m, V, a)))
    ok &= tight <= 1e-8

    m = coarse_torus
    D = diameter(m)
    a = 1 / D ** 2
    n_ok = 0
    for V in random_bumps(m, 10, seed=1):
        V = V * 0.1 / sg.c_alpha(m, V, a)
        outs = oscillation_suite(m, V, a, D ** 2)
        n_ok += all(o.status in OK for o in outs)
    ok &= n_ok == 10
    record(8, bool(ok), f"0 <= sigma <= alpha c_alpha on 12 bumps, constant-V gap {tight:.1e}; "
                        f"oscillation suite {n_ok}/10 bumps")


# -- 9 -----------------------------------------------------------------------------

def test_criterion_9_neumann_eigenvalue_bound(disk):
    expl, inter = est.check_eta1(disk)
    eta = expl.rhs
    ok = expl.status == PASS and inter.status == PASS and 0 < expl.lhs <= eta \
        and 0 < inter.lhs <= eta
    c = est.neumann_constants(2, 0.0, 0.5)
    ok &= c.threshold_exact == Fraction(1, 358) and c.C2_exact == Fraction(35, 288)
    record(9, bool(ok), f"eta_1={eta:.4f} >= intermediate {inter.lhs:.3e} >= explicit "
                        f"{expl.lhs:.3e}; threshold {c.threshold_exact}, C2 {c.C2_exact}")


# -- 10 ----------------------------------------------------------------------------

def test_criterion_10_determinism_and_exit_codes(tmp_path):
    cfg = CONFIGS / "thin_torus.toml"
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [main(["run", str(cfg), "--out", str(a)]), main(["run", str(cfg), "--out", str(b)])]
    same = all((a / f).read_bytes() == (b / f).read_bytes()
               for f in ("summary.csv", "records.txt", "convergence.csv"))
    results = {}
    for p in sorted(CONFIGS.glob("*.toml")):
        results[p.stem] = main(["run", str(p), "--out", str(tmp_path / p.stem)])
    bad = [k for k, v in results.items() if v != EXIT_OK]
    ok = same and codes == [EXIT_OK, EXIT_OK] and not bad and len(results) >= 6
    record(10, ok, f"repeated run byte-identical={same}; {len(results) - len(bad)}/"
                   f"{len(results)} built-in configs exit 0" + (f" (failed: {bad})" if bad else ""))
