"""Experiment execution, refinement sweeps, oracle comparison and report files.

All CSV and text outputs contain only quantities that are deterministic given
the configuration and seed; wall-clock timings go to ``report.json`` only.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import oracles
from .. import semigroup as sg
from ..fields import bump
from ..geometry.mesh import build_manifold
from ..geometry.meshio import atomic_write_text
from ..geometry.metric import diameter
from ..geometry.spec import SpecError
from ..outcome import CALIBRATED, FAIL, HYPOTHESIS_NOT_MET, PASS
from ..spectrum import eigs, ground_state_schrodinger, lambda_1
from .config import ConfigError, ExperimentConfig, validate_potential
from .registry import REGISTRY, make_potentials

SUMMARY_COLUMNS = ("level", "h", "N", "check", "index", "name", "status", "lhs", "rhs",
                   "margin", "tolerance", "samples", "seed", "digest")
DISK_NEUMANN_ROOT = 1.8411837813406593  # first zero of J_1'


@dataclass
class LevelResult:
    level: int
    h: float
    N: int
    digest: str
    outcomes: dict  # check name -> list[CheckOutcome]


@dataclass
class Report:
    config_digest: str
    seed: int
    levels: list
    convergence: list = field(default_factory=list)
    oracle: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(o.status == FAIL for lv in self.levels for outs in lv.outcomes.values()
                   for o in outs)

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0

    def outcomes(self, check=None):
        for lv in self.levels:
            for name, outs in lv.outcomes.items():
                if check is None or name == check:
                    yield from outs


def _num(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _csv(rows, columns) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_num(r[c]) for c in columns) for r in rows)
    return "\n".join(lines) + "\n"


def build_level(spec, h):
    try:
        return build_manifold(spec, h)
    except SpecError as exc:
        raise ConfigError(f"mesh construction failed at resolution {h}: {exc}") from None


def _excess(o) -> float:
    """Relative amount by which ``lhs`` exceeds ``rhs`` (0 when it does not)."""
    if o.status not in (PASS, FAIL) or not (o.rhs > 0 and math.isfinite(o.rhs)):
        return 0.0
    return max(0.0, o.lhs / o.rhs - 1.0)


def _defect(outs, slack) -> float:
    """Discretization defect: the largest ``sharp_excess`` detail where checks
    report one, otherwise the needed slack."""
    vals = [o.details["sharp_excess"] for o in outs if "sharp_excess" in o.details]
    return max(vals) if vals else slack


def convergence_rows(levels, checks) -> list[dict]:
    """One row per (check, level): worst margin, status counts, needed slack
    and discretization defect."""
    rows = []
    for name in checks:
        for lv in levels:
            outs = lv.outcomes[name]
            counted = [o for o in outs if o.status != HYPOTHESIS_NOT_MET]
            slack = max((_excess(o) for o in counted), default=0.0)
            rows.append({
                "check": name, "level": lv.level, "h": lv.h, "N": lv.N,
                "worst_margin": min((o.margin for o in counted), default=math.nan),
                "needed_slack": slack, "defect": _defect(counted, slack),
                "n_pass": sum(o.status == PASS for o in outs),
                "n_fail": sum(o.status == FAIL for o in outs),
                "n_not_met": sum(o.status == HYPOTHESIS_NOT_MET for o in outs),
                "n_calibrated": sum(o.status == CALIBRATED for o in outs),
            })
    return rows


def run_experiment(config: ExperimentConfig) -> Report:
    """Build each refinement level, run all configured checks, collect outcomes."""
    timings = {}
    levels = []
    for i, h in enumerate(config.resolutions):
        t0 = time.perf_counter()
        mesh = build_level(config.spec, h)
        timings[f"level{i}.mesh"] = time.perf_counter() - t0
        results = {}
        for name, params in config.checks.items():
            t0 = time.perf_counter()
            try:
                results[name] = REGISTRY[name].run(mesh, params, config.seed,
                                                   config.tolerance_scale)
            except (ValueError, oracles.OracleError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"checks.{name}: {exc}") from None
            timings[f"level{i}.{name}"] = time.perf_counter() - t0
        levels.append(LevelResult(i, mesh.h, mesh.N, mesh.digest, results))
    rep = Report(config.digest(), config.seed, levels, timings=timings)
    rep.convergence = convergence_rows(levels, config.checks)
    return rep


# -- refinement sweep ------------------------------------------------------------

def analytic_targets(spec) -> dict:
    """Closed-form ``lambda_1``/``eta_1``, ``D`` and ``Vol`` where known."""
    out = {"Vol": spec.volume()}
    D = spec.diameter()
    if D is not None:
        out["D"] = D
    fam = spec.family
    if fam == "flat_torus":
        out["lambda_1"] = (2 * math.pi / max(spec.param("L1"), spec.param("L2"))) ** 2
    elif fam == "round_sphere":
        out["lambda_1"] = 2.0 / spec.param("radius") ** 2
    elif fam == "planar_disk":
        out["eta_1"] = (DISK_NEUMANN_ROOT / spec.param("radius")) ** 2
    elif fam == "spherical_cap" and abs(spec.param("polar_angle") - math.pi / 2) < 1e-12:
        out["eta_1"] = 2.0 / spec.param("sphere_radius") ** 2
    return out


def _measure(mesh, target):
    if target == "Vol":
        return mesh.volume
    if target == "D":
        return diameter(mesh)
    if target == "lambda_1":
        return lambda_1(mesh)
    return eigs(mesh, "neumann", k=2).first_nonzero


def refinement_sweep(config: ExperimentConfig) -> list[dict]:
    """Relative error of each analytic target per level; ``ok`` marks targets
    whose finest-level error does not exceed the coarsest-level error
    (up to :data:`SWEEP_ROUNDOFF`)."""
    levels = config.resolutions
    if len(levels) < 2:
        raise ConfigError("refinement sweep needs at least 2 levels")
    targets = analytic_targets(config.spec)
    rows = []
    for i, h in enumerate(levels):
        mesh = build_level(config.spec, h)
        for name, exact in targets.items():
            value = _measure(mesh, name)
            rows.append({"target": name, "level": i, "h": mesh.h, "N": mesh.N,
                         "value": value, "exact": exact,
                         "rel_error": abs(value - exact) / abs(exact)})
    for name in targets:
        errs = [r for r in rows if r["target"] == name]
        ok = errs[-1]["rel_error"] <= errs[0]["rel_error"] + SWEEP_ROUNDOFF
        for r in errs:
            r["ok"] = ok
    return rows


# errors below this are roundoff (flat tori give exact area and diameter at every level)
SWEEP_ROUNDOFF = 1e-12
SWEEP_COLUMNS = ("target", "level", "h", "N", "value", "exact", "rel_error", "ok")


# -- oracle comparison -----------------------------------------------------------

ORACLE_COLUMNS = ("operation", "error", "tolerance", "ok")


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b))) / (scale if scale > 0 else 1.0)


def oracle_compare(mesh, T, alpha=1.0, V=None, seed=0, tolerance=1e-6,
                   eig_tolerance=1e-8) -> list[dict]:
    """Time-stepped and iterative results against dense linear algebra.

    Errors are max-norm relative errors. Eigenvalue errors are scaled by
    ``lambda_1`` so the zero mode of closed surfaces is measured absolutely.
    """
    oracles._require_small(mesh)
    rng = np.random.default_rng(seed)
    f = rng.random(mesh.N)
    V = bump(mesh, 0, 0.2 * math.sqrt(mesh.volume), 0.5) if V is None else np.asarray(V)
    rows = []

    def add(op, err, tol):
        rows.append({"operation": op, "error": err, "tolerance": tol, "ok": err <= tol})

    add("heat_apply", _rel(sg.heat_apply(mesh, f, T), oracles.heat_apply(mesh, f, T)), tolerance)
    add("heat_kernel_column", _rel(sg.heat_kernel_column(mesh, 0, T),
                                   oracles.heat_kernel(mesh, T)[:, 0]), tolerance)
    add("schrodinger_apply", _rel(sg.schrodinger_apply(mesh, V, f, T),
                                  oracles.heat_apply(mesh, f, T, V=V)), tolerance)
    add("kappa", _rel(sg.kappa(mesh, V, T), oracles.kappa(mesh, V, T)), tolerance)
    add("kappa_zero", abs(sg.kappa(mesh, np.zeros(mesh.N), T)), 0.0)
    add("c_alpha", _rel(sg.c_alpha(mesh, V, alpha), oracles.c_alpha(mesh, V, alpha)), tolerance)
    bc = "closed" if mesh.closed else "neumann"
    k = min(6, mesh.N - 1)
    lam = eigs(mesh, bc, k=k, seed=seed, method="sparse").eigenvalues
    ref = oracles.dense_eigh(mesh)[0][:k]
    add("eigs", float(np.max(np.abs(lam - ref))) / ref[1], eig_tolerance)
    gs = ground_state_schrodinger(mesh, V, seed=seed, method="sparse")
    s_ref, w_ref = oracles.ground_state(mesh, V)
    add("ground_state.sigma", abs(gs.sigma_tilde - s_ref) / max(abs(s_ref), ref[1]),
        eig_tolerance)
    add("ground_state.w", _rel(gs.w, w_ref), tolerance)
    return rows


def oracle_from_config(config: ExperimentConfig) -> list[dict]:
    o = dict(config.oracle or {})
    mesh = build_level(config.spec, float(o.get("resolution", 0.45 if config.spec.is_torus
                                                  else 0.3)))
    if mesh.N > oracles.DENSE_LIMIT:
        raise ConfigError(f"oracle mesh has {mesh.N} > {oracles.DENSE_LIMIT} vertices; "
                          "increase oracle.resolution")
    V = None
    if "potential" in o:
        fields = make_potentials(mesh, validate_potential(o["potential"], "oracle.potential"),
                                 config.seed)
        V = fields[0]
    return oracle_compare(mesh, float(o.get("T", 1.0)), float(o.get("alpha", 1.0)), V,
                          config.seed)


# -- output files -----------------------------------------------------------------

def summary_rows(report: Report) -> list[dict]:
    rows = []
    for lv in report.levels:
        for name, outs in lv.outcomes.items():
            for j, o in enumerate(outs):
                rows.append({"level": lv.level, "h": lv.h, "N": lv.N, "check": name,
                             "index": j, "name": o.name, "status": o.status, "lhs": o.lhs,
                             "rhs": o.rhs, "margin": o.margin, "tolerance": o.tolerance,
                             "samples": o.samples, "seed": o.seed, "digest": o.digest})
    return rows


def records_text(report: Report) -> str:
    parts = [f"# config {report.config_digest} seed {report.seed}\n"]
    for lv in report.levels:
        parts.append(f"\n# level {lv.level} h {lv.h!r} N {lv.N} mesh {lv.digest}\n")
        for name, outs in lv.outcomes.items():
            for o in outs:
                parts.append(f"\n[{name}]\n" + o.to_record())
    return "".join(parts)


def write_outputs(out_dir, files: dict):
    """Write ``{filename: text}`` into ``out_dir``, each file atomically.

    All text is rendered before the first write, so a failure during
    computation leaves no partial outputs.
    """
    os.makedirs(out_dir, exist_ok=True)
    for name in sorted(files):
        atomic_write_text(os.path.join(out_dir, name), files[name])


def report_files(report: Report) -> dict:
    files = {
        "summary.csv": _csv(summary_rows(report), SUMMARY_COLUMNS),
        "records.txt": records_text(report),
        "convergence.csv": _csv(report.convergence, ("check", "level", "h", "N", "worst_margin",
                                                     "needed_slack", "defect", "n_pass", "n_fail",
                                                     "n_not_met", "n_calibrated")),
    }
    if report.oracle:
        files["oracle.csv"] = _csv(report.oracle, ORACLE_COLUMNS)
    meta = {"config_digest": report.config_digest, "seed": report.seed,
            "exit_code": report.exit_code, "timings_s": report.timings,
            "levels": [{"level": lv.level, "h": lv.h, "N": lv.N, "digest": lv.digest}
                       for lv in report.levels]}
    files["report.json"] = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    return files
