"""Small container for named numerical checks, serializable to JSON."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

FORMAT_VERSION = 1


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""


@dataclass
class Report:
    """Named checks plus free-form data. ``passed`` is the conjunction of all checks."""

    title: str
    checks: list[Check] = field(default_factory=list)
    data: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def check(self, name: str, value: float, tol: float, passed: bool | None = None, note: str = "") -> Check:
        """Record ``value <= tol`` (or an explicit verdict)."""
        value = float(value)
        if passed is None:
            passed = bool(value <= tol)
        c = Check(name, value, float(tol), bool(passed), note)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "title": self.title,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "value": _num(c.value), "tol": _num(c.tol), "passed": c.passed, "note": c.note}
                for c in self.checks
            ],
            "data": _jsonable(self.data),
            "notes": list(self.notes),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def summary(self) -> str:
        lines = [f"{self.title}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            lines.append(f"  [{'ok' if c.passed else 'XX'}] {c.name}: {c.value:.4g} (tol {c.tol:.4g}) {c.note}".rstrip())
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj
