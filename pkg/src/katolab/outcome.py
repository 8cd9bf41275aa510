"""Result record for a single instantiated inequality."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

PASS = "pass"
FAIL = "fail"
HYPOTHESIS_NOT_MET = "hypothesis_not_met"
CALIBRATED = "constant_calibrated"
STATUSES = (PASS, FAIL, HYPOTHESIS_NOT_MET, CALIBRATED)


@dataclass
class CheckOutcome:
    """One inequality ``lhs <= rhs`` evaluated on a mesh.

    ``margin`` is ``rhs - lhs`` for difference-type checks and ``rhs / lhs``
    for ratio-type checks (``kind == "ratio"``). ``anchor`` is a short
    statement of the inequality being checked.
    """

    name: str
    lhs: float
    rhs: float
    status: str
    tolerance: float = 0.0
    margin: float = float("nan")
    kind: str = "difference"
    seed: int | None = None
    digest: str = ""
    anchor: str = ""
    units: str = ""
    samples: int = 1
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if math.isnan(self.margin):
            self.margin = compute_margin(self.lhs, self.rhs, self.kind)

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    def to_record(self) -> str:
        """Flat ``key = value`` text record."""
        keys = ("name", "status", "lhs", "rhs", "margin", "kind", "tolerance", "seed",
                "samples", "digest", "units", "anchor")
        d = asdict(self)
        lines = [f"{k} = {_fmt(d[k])}" for k in keys]
        for k in sorted(self.details):
            lines.append(f"detail.{k} = {_fmt(self.details[k])}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def compute_margin(lhs, rhs, kind="difference"):
    if kind == "ratio":
        if lhs == 0:
            return math.inf if rhs >= 0 else -math.inf
        return rhs / lhs
    return rhs - lhs


def leq(name, lhs, rhs, tolerance=0.0, calibrated=False, **kw) -> CheckOutcome:
    """Outcome of ``lhs <= rhs * (1 + tolerance) + abs_tol``.

    The margin is measured against that tolerance-adjusted bound, so it is
    nonnegative exactly when the check passes.
    """
    abs_tol = kw.pop("abs_tol", 0.0)
    lhs, rhs = float(lhs), float(rhs)
    bound = rhs if math.isinf(rhs) else rhs + abs(rhs) * tolerance + abs_tol
    ok = lhs <= bound
    status = (CALIBRATED if calibrated else PASS) if ok else FAIL
    kind = kw.pop("kind", "difference")
    margin = compute_margin(lhs, bound, kind)
    return CheckOutcome(name, lhs, rhs, status, tolerance=tolerance, margin=margin,
                        kind=kind, **kw)


def not_met(name, lhs=float("nan"), rhs=float("nan"), **kw) -> CheckOutcome:
    return CheckOutcome(name, lhs, rhs, HYPOTHESIS_NOT_MET, **kw)
