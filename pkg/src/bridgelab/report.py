"""Check records and suite reports emitted as JSON."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": _jsonable(v.real), "im": _jsonable(v.imag)}
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class CheckRecord:
    name: str
    expected: float
    observed: float
    stderr: Optional[float] = None
    z: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        d = {k: _jsonable(v) for k, v in asdict(self).items()}
        d["pass"] = d.pop("passed")
        return d

    @classmethod
    def statistical(cls, name, expected, observed, stderr, threshold=4.0, note=""):
        """Pass iff ``|observed - expected| <= threshold * stderr``."""
        expected, observed, stderr = float(expected), float(observed), float(stderr)
        if not math.isfinite(stderr) or stderr < 0:
            return cls(name, expected, observed, stderr, None, threshold, False,
                       note or "insufficient statistics")
        diff = observed - expected
        if stderr == 0:
            z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        else:
            z = diff / stderr
        return cls(name, expected, observed, stderr, z, threshold, abs(z) <= threshold, note)

    @classmethod
    def bound(cls, name, observed, tolerance, expected=0.0, note=""):
        """Pass iff ``|observed - expected| < tolerance``."""
        observed = float(observed)
        ok = math.isfinite(observed) and abs(observed - expected) < tolerance
        return cls(name, float(expected), observed, None, None, float(tolerance), ok, note)


@dataclass
class Report:
    suite: str
    records: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def extend(self, records):
        self.records.extend(records)
        return self

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "pass": self.passed,
            "wall_time": self.wall_time,
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)

    def summary_lines(self):
        for r in self.records:
            yield f"{'PASS' if r.passed else 'FAIL'}  {r.name}  observed={r.observed:.6g}" + (
                f"  z={r.z:+.2f}" if r.z is not None and math.isfinite(r.z) else ""
            ) + (f"  ({r.note})" if r.note else "")
