"""Quantum hardware provenance: the metadata a reproducer needs about the QPU run."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

from .errors import InvalidField, UnknownField

TRACKED_FIELDS = (
    "input_generation",
    "qbit_count",
    "topology",
    "input_transformations",
    "embedding_method",
    "postprocessing",
    "timings",
    "runtime_measurement",
    "heuristics",
)
TRACKED_TOTAL = len(TRACKED_FIELDS)


@dataclass(frozen=True)
class Timings:
    """Programming, initialisation and readout times in microseconds."""

    programming_us: int | None = None
    initialisation_us: int | None = None
    readout_us: int | None = None

    @property
    def complete(self) -> bool:
        return None not in (self.programming_us, self.initialisation_us, self.readout_us)

    def to_dict(self) -> dict[str, int | None]:
        return {
            "programming_us": self.programming_us,
            "initialisation_us": self.initialisation_us,
            "readout_us": self.readout_us,
        }


@dataclass(frozen=True)
class HardwareProvenance:
    machine_id: str = ""
    input_generation: str = ""
    qbit_count: int = 0
    topology: tuple[tuple[int, int], ...] = ()
    input_transformations: str = ""
    embedding_method: str = ""
    postprocessing: str = ""
    timings: Timings = field(default_factory=Timings)
    runtime_measurement: str = ""
    heuristics: str = ""

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], where: str = "provenance") -> "HardwareProvenance":
        if not isinstance(data, Mapping):
            raise InvalidField(where, "expected an object")
        known = {f.name for f in fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key.startswith("//"):
                continue
            if key not in known:
                raise UnknownField(f"{where}.{key}")
            kwargs[key] = value

        for name in ("machine_id", "input_generation", "input_transformations",
                     "embedding_method", "postprocessing", "runtime_measurement", "heuristics"):
            if name in kwargs and not isinstance(kwargs[name], str):
                raise InvalidField(f"{where}.{name}", "expected a string")

        if "qbit_count" in kwargs:
            kwargs["qbit_count"] = _non_negative_int(kwargs["qbit_count"], f"{where}.qbit_count")

        if "topology" in kwargs:
            edges = kwargs["topology"]
            if not isinstance(edges, list):
                raise InvalidField(f"{where}.topology", "expected a list of [i, j] pairs")
            parsed = []
            for edge in edges:
                if (not isinstance(edge, list) or len(edge) != 2
                        or not all(_is_int(v) for v in edge)):
                    raise InvalidField(f"{where}.topology", f"bad edge {edge!r}")
                parsed.append((edge[0], edge[1]))
            kwargs["topology"] = tuple(parsed)

        if "timings" in kwargs:
            raw = kwargs["timings"]
            if not isinstance(raw, Mapping):
                raise InvalidField(f"{where}.timings", "expected an object")
            timing_kwargs = {}
            for key, value in raw.items():
                if key.startswith("//"):
                    continue
                if key not in ("programming_us", "initialisation_us", "readout_us"):
                    raise UnknownField(f"{where}.timings.{key}")
                if value is not None:
                    value = _non_negative_int(value, f"{where}.timings.{key}")
                timing_kwargs[key] = value
            kwargs["timings"] = Timings(**timing_kwargs)

        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "machine_id": self.machine_id,
            "input_generation": self.input_generation,
            "qbit_count": self.qbit_count,
            "topology": [list(e) for e in self.topology],
            "input_transformations": self.input_transformations,
            "embedding_method": self.embedding_method,
            "postprocessing": self.postprocessing,
            "timings": self.timings.to_dict(),
            "runtime_measurement": self.runtime_measurement,
            "heuristics": self.heuristics,
        }


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _non_negative_int(value: Any, where: str) -> int:
    if not _is_int(value) or value < 0:
        raise InvalidField(where, "expected a non-negative integer")
    return value


class CompletenessLevel(str, enum.Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"
    ABSENT = "absent"


@dataclass(frozen=True)
class StructuralFinding:
    code: str  # EdgeOutOfRange | SelfLoop | DuplicateEdge
    edge: tuple[int, int]
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ProvenanceReport:
    score: int
    present: tuple[str, ...]
    missing: tuple[str, ...]
    findings: tuple[StructuralFinding, ...]
    total: int = TRACKED_TOTAL

    @property
    def level(self) -> CompletenessLevel:
        return completeness_level(self)


def field_present(p: HardwareProvenance, name: str) -> bool:
    value = getattr(p, name)
    if name == "qbit_count":
        return value > 0
    if name == "topology":
        return len(value) > 0
    if name == "timings":
        return value.complete
    return bool(value.strip())


def topology_findings(edges, qbit_count: int) -> list[StructuralFinding]:
    findings = []
    seen: set[tuple[int, int]] = set()
    for i, j in edges:
        edge = (i, j)
        if i == j:
            findings.append(StructuralFinding("SelfLoop", edge, f"edge {edge} connects qbit {i} to itself"))
        lo, hi = min(i, j), max(i, j)
        if lo < 0 or hi >= qbit_count:
            findings.append(StructuralFinding(
                "EdgeOutOfRange", edge, f"edge {edge} outside 0..{qbit_count - 1}"))
        key = (lo, hi)
        if key in seen and i != j:
            findings.append(StructuralFinding("DuplicateEdge", edge, f"edge {edge} listed more than once"))
        seen.add(key)
    return findings


def validate_provenance(p: HardwareProvenance) -> ProvenanceReport:
    present = tuple(n for n in TRACKED_FIELDS if field_present(p, n))
    missing = tuple(n for n in TRACKED_FIELDS if n not in present)
    return ProvenanceReport(
        score=len(present),
        present=present,
        missing=missing,
        findings=tuple(topology_findings(p.topology, p.qbit_count)),
    )


def completeness_level(report: ProvenanceReport) -> CompletenessLevel:
    if report.score == report.total and not report.findings:
        return CompletenessLevel.COMPLETE
    if report.score == 0:
        return CompletenessLevel.ABSENT
    return CompletenessLevel.PARTIAL
