"""Run reports: JSON emission with full-precision numbers.

Every numeric claim printed by the CLI also lands in the JSON with 17
significant digits, so doubles round-trip exactly.  Timestamps and wall clock
are the only fields excluded from the determinism contract.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["Check", "ExperimentResult", "RunReport", "to_json", "write_report"]

SCHEMA_VERSION = 1


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return f"{x:.17g}"


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def to_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with %.17g floats (insertion-ordered dict keys)."""
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return f'"{_escape(obj)}"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad_in}"{_escape(str(k))}": {to_json(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad_in}{to_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    try:
        import numpy as np

        if isinstance(obj, np.integer):
            return str(int(obj))
        if isinstance(obj, np.floating):
            return _fmt_float(float(obj))
        if isinstance(obj, np.ndarray):
            return to_json(obj.tolist(), indent)
        if isinstance(obj, np.bool_):
            return "true" if bool(obj) else "false"
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


@dataclass
class Check:
    """One named verdict with its supporting numbers."""

    name: str
    passed: bool
    numbers: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "numbers": dict(self.numbers)}


@dataclass
class ExperimentResult:
    """What an experiment computed: checks plus any artifact files written."""

    checks: list
    artifacts: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class RunReport:
    experiment: str
    criterion: str
    seed: int
    config: dict
    checks: list
    verdict: str
    artifacts: list
    library_version: str
    started_utc: str
    wall_clock_s: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "experiment": self.experiment,
            "criterion": self.criterion,
            "seed": self.seed,
            "config": dict(self.config),
            "library_version": self.library_version,
            "started_utc": self.started_utc,
            "wall_clock_s": float(self.wall_clock_s),
            "checks": [c.to_dict() for c in self.checks],
            "verdict": self.verdict,
            "artifacts": list(self.artifacts),
            "extras": dict(self.extras),
        }


def utc_now() -> str:
    return (
        datetime.datetime.now(datetime.timezone.utc)
        .replace(microsecond=0)
        .isoformat()
        .replace("+00:00", "Z")
    )


def write_report(report: RunReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(to_json(report.to_dict()) + "\n")
    return path
