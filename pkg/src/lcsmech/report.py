"""Verdict records shared by every checking operation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Verdict:
    """Outcome of a check.

    ``method`` is ``"exact"`` when the decision came from normal-form
    comparison and ``"sampled"`` when it came from evaluation at random points.
    A verdict is truthy iff the check passed.
    """

    ok: bool
    method: str
    residual: Any = None
    seed: int | None = None
    samples: int | None = None
    tolerance: float | None = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.ok)

    def to_dict(self) -> dict:
        out = {"ok": bool(self.ok), "method": self.method}
        for name in ("residual", "seed", "samples", "tolerance"):
            value = getattr(self, name)
            if value is not None:
                out[name] = jsonable(value)
        if self.details:
            out["details"] = jsonable(self.details)
        return out


def combine(verdicts) -> str:
    """``"exact"`` if every verdict was decided exactly, else ``"sampled"``."""
    return "exact" if all(v.method == "exact" for v in verdicts) else "sampled"


def jsonable(value):
    """Convert reports into plain JSON types, deterministically."""
    from fractions import Fraction

    import numpy as np

    if isinstance(value, Verdict):
        return value.to_dict()
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "to_json"):
        return value.to_json()
    return str(value)
