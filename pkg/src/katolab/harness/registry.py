"""Named checks available to experiment configurations.

Each entry wraps a check function, says which meshes it applies to and
whether it consumes a potential ``V``. Allowed configuration keys are the
function's keyword parameters (minus the mesh and internal arguments), plus
``potential`` for checks taking ``V``.
"""
from __future__ import annotations

import inspect
import math
from dataclasses import dataclass

import numpy as np

from .. import estimates as est
from .. import semigroup as sg
from ..fields import bump, random_bumps
from ..geometry.metric import diameter
from ..outcome import CheckOutcome
from ..spectrum import check_ground_state_bound, oscillation_suite
from .config import ConfigError, validate_potential

CLOSED, BOUNDARY, ANY = "closed", "boundary", "any"
# arguments never taken from configuration files
_INTERNAL = {"mesh", "V", "Vs", "plan", "pairs"}
_SCALED = ("slack", "tolerance")


def _kato_bridge(mesh, Vs, alpha=1.0, beta=1.0, tolerance=1e-6, seed=0):
    """Bridge inequality for each potential; the Kato constants share one propagation."""
    ks = sg.kappa_many(mesh, Vs, beta)
    out = []
    for V, k in zip(Vs, ks):
        o = sg.kappa_c_bridge(mesh, V, alpha, beta, tolerance=tolerance, kappa_beta=k)
        o.seed = seed
        out.append(o)
    return out


def _oscillation(mesh, V, alpha=None, T=None, Lambda=None, c_n=1.0, seed=0, n_test=20):
    """``alpha`` defaults to ``1/D^2`` and ``T`` to ``D^2``."""
    D = diameter(mesh)
    alpha = 1.0 / (D * D) if alpha is None else alpha
    T = D * D if T is None else T
    return oscillation_suite(mesh, V, alpha, T, Lambda=Lambda, c_n=c_n, D=D, seed=seed,
                             n_test=n_test)


def _sg_norm(mesh, V, T=None, t=None, c_n=None, seed=0):
    """``T`` defaults to ``D^2`` and ``t`` to ``D^2/2``."""
    D = diameter(mesh)
    T = D * D if T is None else T
    t = 0.5 * D * D if t is None else t
    return est.check_sg_norm_bound(mesh, V, T, t, c_n=c_n, seed=seed)


@dataclass(frozen=True)
class CheckEntry:
    name: str
    func: object
    domain: str
    potential: bool = False
    summary: str = ""
    batched: bool = False  # func takes the list of all potentials at once

    @property
    def parameters(self) -> dict:
        sig = inspect.signature(self.func)
        return {k: p.default for k, p in sig.parameters.items() if k not in _INTERNAL}

    def applies_to(self, closed: bool) -> bool:
        return self.domain == ANY or (self.domain == CLOSED) == closed

    def validate(self, params: dict, spec, where: str) -> dict:
        allowed = set(self.parameters) | ({"potential"} if self.potential else set())
        bad = sorted(set(params) - allowed)
        if bad:
            raise ConfigError(f"{where}: unknown key(s) {', '.join(bad)}")
        if not self.applies_to(not spec.has_boundary):
            kind = "closed surfaces" if self.domain == CLOSED else "surfaces with boundary"
            raise ConfigError(f"{where}: check applies only to {kind}")
        out = dict(params)
        if self.potential:
            out["potential"] = validate_potential(params.get("potential", {"kind": "bump"}),
                                                  f"{where}.potential")
        if isinstance(out.get("rho_minus"), dict):
            out["rho_minus"] = validate_potential(out["rho_minus"], f"{where}.rho_minus")
        for key in ("t_grid", "scales", "x_seeds"):
            if key in out:
                if not isinstance(out[key], list) or not out[key]:
                    raise ConfigError(f"{where}.{key}: expected a nonempty array")
                out[key] = tuple(out[key])
        return out

    def run(self, mesh, params: dict, seed: int, tolerance_scale: float = 1.0) -> list:
        """Evaluate on ``mesh``; returns a flat list of outcomes."""
        kw = {k: v for k, v in params.items() if k != "potential"}
        defaults = self.parameters
        if "seed" in defaults:
            kw["seed"] = seed
        for key in _SCALED:
            if key in defaults:
                kw[key] = float(kw.get(key, defaults[key])) * tolerance_scale
        if isinstance(kw.get("rho_minus"), dict):
            fields = make_potentials(mesh, kw["rho_minus"], seed)
            if len(fields) != 1:
                raise ConfigError(f"checks.{self.name}.rho_minus must be a single field")
            kw["rho_minus"] = fields[0]
        if not self.potential:
            return _flat(self.func(mesh, **kw))
        Vs = make_potentials(mesh, params["potential"], seed)
        if self.batched:
            results = _flat(self.func(mesh, Vs, **kw))
            for i, o in enumerate(results):
                o.details = dict(o.details, potential=i)
            return results
        out = []
        for i, V in enumerate(Vs):
            for o in _flat(self.func(mesh, V, **kw)):
                o.details = dict(o.details, potential=i)
                out.append(o)
        return out


def _flat(result) -> list:
    return [result] if isinstance(result, CheckOutcome) else list(result)


def _scale_to_kappa(mesh, V, target, T):
    k = sg.kappa(mesh, V, T)
    if not k > 0:
        raise ConfigError("target_kappa needs a nonzero potential")
    return V * (target / k)


def make_potentials(mesh, pot: dict, seed: int) -> list:
    """Fields described by a ``potential`` table (see the config schema)."""
    kind = pot["kind"]
    width = pot.get("width")
    width = 0.1 * math.sqrt(mesh.volume) if width is None else float(width)
    if kind == "constant":
        fields = [np.full(mesh.N, float(pot.get("value", 1.0)))]
    elif kind == "bump":
        x = int(pot.get("x", 0))
        if not 0 <= x < mesh.N:
            raise ConfigError(f"potential: vertex {x} out of range")
        fields = [bump(mesh, x, width, float(pot.get("amplitude", 1.0)))]
    else:
        fields = random_bumps(mesh, int(pot.get("count", 10)), seed=int(pot.get("seed", seed)),
                              width=width, amplitude=float(pot.get("amplitude", 1.0)))
    if any(np.any(f < 0) for f in fields):
        raise ConfigError("potential must be nonnegative")
    if "target_kappa" in pot:
        T = float(pot.get("T", 1.0))
        fields = [_scale_to_kappa(mesh, f, float(pot["target_kappa"]), T) for f in fields]
    return fields


def _entries():
    rows = [
        ("zhong_yang", est.check_zhong_yang, CLOSED, False,
         "lambda_1 D^2/pi^2 >= alpha_target under a small Kato constant"),
        ("cheng", est.check_cheng, CLOSED, False,
         "lambda_1 <= 4/R^2 V(x,R)/V(x,R/2) at R = D/2"),
        ("li_yau_closed", est.check_li_yau_closed, CLOSED, False,
         "Li-Yau gradient inequality on heat-kernel columns"),
        ("harnack_closed", est.check_harnack_closed, CLOSED, False,
         "parabolic Harnack inequality on sampled (x, y, s, t)"),
        ("carron_bundle", est.check_carron_bundle, CLOSED, False,
         "empirical doubling, heat-kernel and spectral-gap constants"),
        ("aux_J", est.check_aux_J, CLOSED, False,
         "elliptic auxiliary function |J - 1| <= delta under its Kato gate"),
        ("lp_kato_trend", est.check_lp_kato_trend, CLOSED, False,
         "Kato constant controlled by the normalized L^p norm"),
        ("sg_norm_bound", _sg_norm, CLOSED, True,
         "L^2 -> L^inf norm of the Schrödinger semigroup (dense, N <= 300)"),
        ("oscillation", _oscillation, CLOSED, True,
         "ground-state oscillation inequalities"),
        ("kato_bridge", _kato_bridge, ANY, True,
         "(1 - e^{-ab}) c_a <= kappa_b <= e^{ab} c_a", True),
        ("ground_state_bound", check_ground_state_bound, ANY, True,
         "0 <= sigma_tilde <= alpha c_alpha"),
        ("li_yau_neumann", est.check_li_yau_neumann, BOUNDARY, False,
         "Li-Yau inequality with boundary constants"),
        ("harnack_neumann", est.check_harnack_neumann, BOUNDARY, False,
         "same-point and two-point Harnack inequalities with boundary"),
        ("neumann_hk", est.check_neumann_hk, BOUNDARY, False,
         "h_t(x,x) V(x, sqrt t) bounded by the explicit constant"),
        ("eta1", est.check_eta1, BOUNDARY, False,
         "first Neumann eigenvalue against explicit and kernel bounds"),
        ("J_bracket", est.check_J_bracket, BOUNDARY, False,
         "exp(-16 mu_T) <= J <= 1 for the parabolic auxiliary function"),
    ]
    return {r[0]: CheckEntry(*r) for r in rows}


REGISTRY = _entries()

# built-in suite per manifold type (used by configs/ and the acceptance tests)
CLOSED_SUITE = ("zhong_yang", "cheng", "li_yau_closed", "harnack_closed", "carron_bundle",
                "aux_J", "kato_bridge", "ground_state_bound")
BOUNDARY_SUITE = ("li_yau_neumann", "harnack_neumann", "neumann_hk", "eta1", "J_bracket",
                  "kato_bridge", "ground_state_bound")


def list_checks() -> list[tuple[str, str, str]]:
    return [(e.name, e.domain, e.summary) for e in REGISTRY.values()]
