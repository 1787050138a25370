"""Machine-readable verification reports (JSON schema version "1").

A report is canonical except for its "runtime" block (wall time, worker
count, backend): identical config + seed reproduce the canonical body
byte-for-byte under any worker count.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"
SCHEMA_PATH = Path(__file__).resolve().parents[2] / "docs" / "report.schema.json"


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class CheckAgg:
    """Streaming aggregation of one named check over sample chunks.

    margin >= 0 means the sample satisfies the contract; the worst margin
    and its witness are kept (first occurrence wins ties, so aggregation
    order is deterministic)."""

    name: str
    threshold: str
    asserted: bool = True
    count: int = 0
    failures: int = 0
    worst: float = float("inf")
    witness: dict = None

    def update(self, margins, witness_fn=None):
        margins = np.asarray(margins, dtype=np.float64).reshape(-1)
        if margins.size == 0:
            return
        self.count += int(margins.size)
        self.failures += int((margins < 0.0).sum())
        i = int(np.argmin(margins))
        if margins[i] < self.worst:
            self.worst = float(margins[i])
            if witness_fn is not None:
                self.witness = _plain(witness_fn(i))

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def as_dict(self) -> dict:
        worst = None if self.count == 0 else self.worst
        return {
            "name": self.name,
            "threshold": self.threshold,
            "asserted": bool(self.asserted),
            "count": self.count,
            "pass_count": self.count - self.failures,
            "failures": self.failures,
            "worst_margin": worst,
            "witness": self.witness,
        }


def build_report(command: str, config: dict, checks, results: dict, runtime: dict) -> dict:
    from . import __version__
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "library_version": __version__,
        "config": _plain(config),
        "checks": [c.as_dict() if isinstance(c, CheckAgg) else _plain(c) for c in checks],
        "results": _plain(results),
        "runtime": _plain(runtime),
    }


def canonical_body(report: dict) -> dict:
    """Everything except the volatile runtime block."""
    return {k: v for k, v in report.items() if k != "runtime"}


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1)


def dumps_canonical(report: dict) -> str:
    return json.dumps(canonical_body(report), sort_keys=True, indent=1)


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps_report(report) + "\n", encoding="ascii")


def violation_count(report: dict) -> int:
    return sum(c["failures"] for c in report["checks"] if c["asserted"])
