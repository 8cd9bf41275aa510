"""Analytic descriptions of the model surfaces.

Every built-in family except the flat torus is a surface of revolution
``ds^2 = dt^2 + f(t)^2 dtheta^2`` over an interval ``[t0, t1]``, so curvature
and boundary geometry follow from the profile ``f`` in closed form.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp
from scipy import integrate

FAMILIES = (
    "round_sphere",
    "flat_torus",
    "surface_of_revolution",
    "planar_disk",
    "planar_annulus",
    "spherical_cap",
)
SOR_KINDS = ("closed", "capped", "two_boundaries")

_T = sp.Symbol("t", real=True)
POLE_TOL = 1e-9


class SpecError(ValueError):
    """Raised when a manifold description violates one of its invariants."""


def _as_float(value, name):
    if isinstance(value, str):
        try:
            value = float(sp.sympify(value))
        except (sp.SympifyError, TypeError) as exc:
            raise SpecError(f"{name}: cannot evaluate {value!r}") from exc
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{name}: not a number: {value!r}") from exc
    if not math.isfinite(value):
        raise SpecError(f"{name}: must be finite")
    return value


class Profile:
    """Callable profile ``f`` with derivatives up to third order."""

    def __init__(self, expr: str):
        try:
            e = sp.sympify(expr, locals={"t": _T})
        except (sp.SympifyError, TypeError, SyntaxError) as exc:
            raise SpecError(f"profile: cannot parse {expr!r}") from exc
        free = e.free_symbols - {_T}
        if free:
            raise SpecError(f"profile: unknown symbols {sorted(map(str, free))}")
        self.expr = expr
        derivs = [e]
        for _ in range(3):
            derivs.append(sp.diff(derivs[-1], _T))
        self._fns = [sp.lambdify(_T, d, modules="numpy") for d in derivs]

    def __call__(self, t, order=0):
        t = np.asarray(t, dtype=float)
        out = self._fns[order](t)
        return np.broadcast_to(np.asarray(out, dtype=float), t.shape).copy()


@dataclass(frozen=True)
class ManifoldSpec:
    """Analytic model manifold.

    Parameters
    ----------
    family : str
        One of ``FAMILIES``.
    params : tuple of (name, value)
        Family parameters. Use the constructor helpers (``round_sphere`` etc.)
        rather than building this by hand.
    """

    family: str
    params: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"family: unknown family {self.family!r}")
        self._validate()

    # -- parameter access -------------------------------------------------
    def param(self, name):
        for k, v in self.params:
            if k == name:
                return v
        raise KeyError(name)

    @property
    def n(self) -> int:
        return 2

    @property
    def is_torus(self) -> bool:
        return self.family == "flat_torus"

    @cached_property
    def revolution(self):
        """``(profile, t0, t1, kind)`` for surfaces of revolution, else None."""
        fam = self.family
        if fam == "round_sphere":
            r = self.param("radius")
            return Profile(f"{r!r}*sin(t/{r!r})"), 0.0, math.pi * r, "closed"
        if fam == "spherical_cap":
            r = self.param("sphere_radius")
            th = self.param("polar_angle")
            return Profile(f"{r!r}*sin(t/{r!r})"), 0.0, r * th, "capped"
        if fam == "planar_disk":
            return Profile("t"), 0.0, self.param("radius"), "capped"
        if fam == "planar_annulus":
            return Profile("t"), self.param("r_in"), self.param("r_out"), "two_boundaries"
        if fam == "surface_of_revolution":
            return (Profile(self.param("profile")), 0.0, self.param("length"),
                    self.param("kind"))
        return None

    @property
    def has_boundary(self) -> bool:
        rev = self.revolution
        return rev is not None and rev[3] != "closed"

    # -- analytic quantities ---------------------------------------------
    def volume(self) -> float:
        """Analytic area."""
        if self.is_torus:
            return self.param("L1") * self.param("L2")
        f, t0, t1, _ = self.revolution
        val, _ = integrate.quad(lambda s: float(f(s)), t0, t1, limit=200,
                                epsabs=1e-13, epsrel=1e-12)
        return 2.0 * math.pi * val

    def diameter(self):
        """Analytic diameter when known in closed form, else None."""
        fam = self.family
        if fam == "round_sphere":
            return math.pi * self.param("radius")
        if fam == "flat_torus":
            return 0.5 * math.hypot(self.param("L1"), self.param("L2"))
        if fam == "planar_disk":
            return 2.0 * self.param("radius")
        return None

    # -- validation -------------------------------------------------------
    def _validate(self):
        fam = self.family
        p = dict(self.params)
        pos = {
            "round_sphere": ("radius",),
            "flat_torus": ("L1", "L2"),
            "planar_disk": ("radius",),
            "planar_annulus": ("r_in", "r_out"),
            "spherical_cap": ("sphere_radius", "polar_angle"),
            "surface_of_revolution": ("length",),
        }[fam]
        for name in pos:
            if name not in p:
                raise SpecError(f"{name}: missing parameter for {fam}")
            if not p[name] > 0:
                raise SpecError(f"{name}: length parameters must be strictly positive")
        if fam == "planar_annulus" and not p["r_in"] < p["r_out"]:
            raise SpecError("r_in < r_out violated")
        if fam == "spherical_cap" and not p["polar_angle"] < math.pi:
            raise SpecError("polar_angle must lie in (0, pi)")
        if fam == "surface_of_revolution":
            if p.get("kind") not in SOR_KINDS:
                raise SpecError(f"kind: must be one of {SOR_KINDS}")
            if "profile" not in p:
                raise SpecError("profile: missing for surface_of_revolution")
        if self.revolution is not None:
            self._check_profile()

    def _check_profile(self):
        f, t0, t1, kind = self.revolution
        ts = np.linspace(t0, t1, 2001)
        vals = f(ts)
        if not np.all(np.isfinite(vals)):
            raise SpecError("profile f must be finite on the interval")
        for k in range(1, 3):
            if not np.all(np.isfinite(f(ts[1:-1], k))):
                raise SpecError("profile f must be C^2 on the interval")
        poles = []
        if kind in ("closed", "capped"):
            poles.append(0)
        if kind == "closed":
            poles.append(-1)
        inner = np.ones(ts.size, dtype=bool)
        for idx in poles:
            inner[idx] = False
            tp = ts[idx]
            if abs(float(f(tp))) > POLE_TOL:
                raise SpecError(f"pole closure f({tp:g}) = 0 violated")
            if abs(abs(float(f(tp, 1))) - 1.0) > POLE_TOL:
                raise SpecError(f"pole closure |f'({tp:g})| = 1 violated")
        if np.any(vals[inner] <= 0.0):
            bad = ts[inner][vals[inner] <= 0.0][0]
            raise SpecError(f"f > 0 on the interior violated (f({bad:g}) <= 0)")

    # -- text form ---------------------------------------------------------
    def to_string(self) -> str:
        parts = []
        for k, v in self.params:
            parts.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
        return f"{self.family}:" + ";".join(parts)

    @classmethod
    def from_string(cls, text: str) -> "ManifoldSpec":
        """Parse ``family:key=value;key=value`` (``;`` or ``,`` separated)."""
        text = text.strip()
        fam, _, rest = text.partition(":")
        fam = fam.strip()
        if fam not in _BUILDERS:
            raise SpecError(f"family: unknown family {fam!r}")
        kwargs = {}
        for item in _split_params(rest):
            key, eq, value = item.partition("=")
            if not eq:
                raise SpecError(f"malformed parameter {item!r}")
            kwargs[key.strip()] = value.strip()
        try:
            return _BUILDERS[fam](**kwargs)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc


def _split_params(rest):
    # split on ; or on commas that are not inside parentheses
    out, depth, cur = [], 0, []
    for ch in rest:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == ";" or (ch == "," and depth == 0):
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s for s in (x.strip() for x in out) if s]


def round_sphere(radius=1.0) -> ManifoldSpec:
    return ManifoldSpec("round_sphere", (("radius", _as_float(radius, "radius")),))


def flat_torus(L1=2 * math.pi, L2=2 * math.pi) -> ManifoldSpec:
    return ManifoldSpec("flat_torus", (("L1", _as_float(L1, "L1")), ("L2", _as_float(L2, "L2"))))


def planar_disk(radius=1.0) -> ManifoldSpec:
    return ManifoldSpec("planar_disk", (("radius", _as_float(radius, "radius")),))


def planar_annulus(r_in=1.0, r_out=2.0) -> ManifoldSpec:
    return ManifoldSpec("planar_annulus", (("r_in", _as_float(r_in, "r_in")),
                                           ("r_out", _as_float(r_out, "r_out"))))


def spherical_cap(sphere_radius=1.0, polar_angle=math.pi / 2) -> ManifoldSpec:
    return ManifoldSpec("spherical_cap", (("sphere_radius", _as_float(sphere_radius, "sphere_radius")),
                                          ("polar_angle", _as_float(polar_angle, "polar_angle"))))


def surface_of_revolution(profile: str, length, kind: str = "closed") -> ManifoldSpec:
    """Surface ``dt^2 + f(t)^2 dtheta^2`` for ``t`` in ``[0, length]``.

    ``profile`` is an expression in ``t`` (sympy syntax), ``kind`` one of
    ``closed`` (poles at both ends), ``capped`` (pole at 0, boundary at
    ``length``) or ``two_boundaries``.
    """
    profile = re.sub(r"\s+", "", str(profile))
    return ManifoldSpec("surface_of_revolution", (("profile", profile),
                                                  ("length", _as_float(length, "length")),
                                                  ("kind", str(kind))))


_BUILDERS = {
    "round_sphere": round_sphere,
    "flat_torus": flat_torus,
    "planar_disk": planar_disk,
    "planar_annulus": planar_annulus,
    "spherical_cap": spherical_cap,
    "surface_of_revolution": surface_of_revolution,
}
