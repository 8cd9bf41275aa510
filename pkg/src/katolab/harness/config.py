"""Experiment configuration files (TOML) with strict key validation.

Schema::

    seed = 0                        # required
    output = "out/torus"            # optional; --out overrides

    [manifold]
    spec = "flat_torus:L1=2*pi;L2=2*pi"   # or: family = "..." plus [manifold.params]
    resolution = 0.1                # optional mesh size; default targets ~4500 vertices
    levels = [0.2, 0.1, 0.05]       # optional refinement levels, strictly decreasing

    [checks.<name>]                 # one table per check; keys are check parameters
    slack = 0.1

    [checks.<name>.potential]       # for checks taking a potential V
    kind = "bump"                   # bump | constant | random_bumps
    ...

    [oracle]                        # optional, used by the ``oracle`` verb
    resolution = 0.45
    T = 1.0
    alpha = 1.0
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..geometry.spec import ManifoldSpec, SpecError, _BUILDERS


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


TOP_KEYS = {"seed", "output", "manifold", "checks", "oracle"}
MANIFOLD_KEYS = {"spec", "family", "params", "resolution", "levels"}
ORACLE_KEYS = {"resolution", "T", "alpha", "potential"}
POTENTIAL_KEYS = {
    "bump": {"kind", "x", "width", "amplitude", "target_kappa", "T"},
    "constant": {"kind", "value"},
    "random_bumps": {"kind", "count", "seed", "width", "amplitude", "target_kappa", "T"},
}


@dataclass
class ExperimentConfig:
    spec: ManifoldSpec
    seed: int
    checks: dict
    resolution: float | None = None
    levels: tuple = ()
    output: str | None = None
    oracle: dict | None = None
    tolerance_scale: float = 1.0
    source: dict = field(default_factory=dict, repr=False)

    @property
    def resolutions(self) -> tuple:
        """Mesh sizes to run, coarsest first (``(None,)`` means default resolution)."""
        if self.levels:
            return tuple(self.levels)
        return (self.resolution,)

    def digest(self) -> str:
        payload = json.dumps(self.source, sort_keys=True, default=str)
        extra = f"|seed={self.seed}|levels={self.levels}|scale={self.tolerance_scale!r}"
        return hashlib.sha256((payload + extra).encode()).hexdigest()[:16]


def _unknown(keys, allowed, where):
    bad = sorted(set(keys) - set(allowed))
    if bad:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(bad)}")


def _positive(value, where):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{where}: must be positive")
    return v


def check_levels(levels, where="levels"):
    levels = tuple(_positive(h, where) for h in levels)
    if any(b >= a for a, b in zip(levels, levels[1:])):
        raise ConfigError(f"{where}: resolutions must be strictly decreasing")
    return levels


def validate_potential(pot, where):
    if not isinstance(pot, dict) or "kind" not in pot:
        raise ConfigError(f"{where}: potential needs a 'kind'")
    kind = pot["kind"]
    if kind not in POTENTIAL_KEYS:
        raise ConfigError(f"{where}: unknown potential kind {kind!r}")
    _unknown(pot, POTENTIAL_KEYS[kind], where)
    return dict(pot)


def parse_spec(man: dict) -> ManifoldSpec:
    if "spec" in man:
        if "family" in man or "params" in man:
            raise ConfigError("manifold: give either 'spec' or 'family'/'params'")
        return ManifoldSpec.from_string(str(man["spec"]))
    if "family" not in man:
        raise ConfigError("manifold: missing 'spec' or 'family'")
    fam = man["family"]
    if fam not in _BUILDERS:
        raise ConfigError(f"manifold: unknown family {fam!r}")
    params = man.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("manifold.params must be a table")
    try:
        return _BUILDERS[fam](**params)
    except TypeError as exc:
        raise ConfigError(f"manifold.params: {exc}") from None


def config_from_dict(data: dict, registry=None) -> ExperimentConfig:
    """Validate a parsed TOML document. ``registry`` validates check names and keys."""
    from .registry import REGISTRY

    registry = REGISTRY if registry is None else registry
    _unknown(data, TOP_KEYS, "config")
    if "seed" not in data:
        raise ConfigError("config: 'seed' is required")
    seed = data["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("config: 'seed' must be a nonnegative integer")
    man = data.get("manifold")
    if not isinstance(man, dict):
        raise ConfigError("config: missing [manifold] table")
    _unknown(man, MANIFOLD_KEYS, "manifold")
    try:
        spec = parse_spec(man)
    except SpecError as exc:
        raise ConfigError(f"manifold: {exc}") from None
    resolution = _positive(man["resolution"], "manifold.resolution") if "resolution" in man \
        else None
    levels = check_levels(man.get("levels", ()), "manifold.levels")
    checks = data.get("checks", {})
    if not isinstance(checks, dict) or not checks:
        raise ConfigError("config: at least one [checks.<name>] table is required")
    parsed = {}
    for name, params in checks.items():
        if name not in registry:
            raise ConfigError(f"checks: unknown check {name!r} (see list-checks)")
        if not isinstance(params, dict):
            raise ConfigError(f"checks.{name} must be a table")
        parsed[name] = registry[name].validate(params, spec, f"checks.{name}")
    oracle = data.get("oracle")
    if oracle is not None:
        if not isinstance(oracle, dict):
            raise ConfigError("oracle must be a table")
        _unknown(oracle, ORACLE_KEYS, "oracle")
        oracle = dict(oracle)
        if "potential" in oracle:
            oracle["potential"] = validate_potential(oracle["potential"], "oracle.potential")
    output = data.get("output")
    return ExperimentConfig(spec=spec, seed=seed, checks=parsed, resolution=resolution,
                            levels=levels, output=None if output is None else str(output),
                            oracle=oracle, source=data)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)
