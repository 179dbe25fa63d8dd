"""Findings, the audit report container and its JSON serialization."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .errors import AuditError, ParameterError

LEVELS = ("data", "modeling", "interpretation")
SEVERITIES = ("info", "warning", "critical")
SCHEMA_VERSION = 1


class InternalError(AuditError, RuntimeError):
    """A broken invariant inside the tool, not a problem with the input."""


def _metric(v):
    if v is None or isinstance(v, bool):
        return None if v is None else int(v)
    if isinstance(v, int):
        return v
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class Finding:
    id: str
    level: str
    kind: str
    severity: str
    metrics: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ParameterError(f"unknown level {self.level!r}")
        if self.severity not in SEVERITIES:
            raise ParameterError(f"unknown severity {self.severity!r}")
        self.metrics = {str(k): _metric(v) for k, v in self.metrics.items()}
        self.artifacts = [str(a) for a in self.artifacts]
        self.notes = [str(n) for n in self.notes]

    def sort_key(self):
        return (LEVELS.index(self.level), self.kind, self.id)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "kind": self.kind,
            "severity": self.severity,
            "metrics": dict(sorted(self.metrics.items())),
            "artifacts": list(self.artifacts),
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(d["id"], d["level"], d["kind"], d["severity"], dict(d["metrics"]), list(d["artifacts"]),
                   list(d["notes"]))


@dataclass
class AuditReport:
    findings: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int | None = None
    created_at: str | None = None
    tool_version: str = __version__

    def sorted_findings(self) -> list:
        return sorted(self.findings, key=Finding.sort_key)

    def summary(self) -> dict:
        return {
            "n_findings": len(self.findings),
            "by_severity": {s: sum(f.severity == s for f in self.findings) for s in SEVERITIES},
            "by_level": {lv: sum(f.level == lv for f in self.findings) for lv in LEVELS},
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "created_at": self.created_at,
            "config": self.config,
            "summary": self.summary(),
            "findings": [f.to_dict() for f in self.sorted_findings()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditReport":
        return cls(
            findings=[Finding.from_dict(f) for f in d["findings"]],
            config=d["config"],
            seed=d["seed"],
            created_at=d["created_at"],
            tool_version=d["tool_version"],
        )

    def max_severity(self) -> str | None:
        if not self.findings:
            return None
        return max((f.severity for f in self.findings), key=SEVERITIES.index)


def report_schema() -> dict:
    return json.loads(resources.files("endobias").joinpath("report_schema.json").read_text("utf-8"))


def validate_report(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` breaks the v1 schema."""
    jsonschema.validate(doc, report_schema())


def now_utc() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def dumps(report: AuditReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: AuditReport, out_dir, filename: str = "report.json") -> Path:
    """Write ``report.json`` into ``out_dir`` after checking ids and artifacts.

    Artifact paths are relative to ``out_dir`` and must already exist.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = [f.id for f in report.findings]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise InternalError(f"duplicate finding ids: {dupes}")
    for f in report.findings:
        for a in f.artifacts:
            if os.path.isabs(a) or not (out / a).is_file():
                raise InternalError(f"finding {f.id}: artifact {a!r} missing from {out}")
    doc = report.to_dict()
    validate_report(doc)
    path = out / filename
    path.write_text(dumps(report), encoding="utf-8")
    return path


def read_report(path) -> AuditReport:
    return AuditReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
