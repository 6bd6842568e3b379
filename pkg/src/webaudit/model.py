"""Observation records shared by the scanner, the static analyzer and the scorer."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

YES = "Yes"
NO = "No"
NA = "NA"
UNKNOWN = "Unknown"

BOOLEAN_VALUES = frozenset({YES, NO, NA, UNKNOWN})
# Values that never earn credit, whatever the parameter kind.
NON_FULFILLING = frozenset({NO, NA, UNKNOWN})


class Source(enum.Enum):
    Dynamic = "Dynamic"
    Static = "Static"
    Manual = "Manual"

    @property
    def precedence(self) -> int:
        # Runtime behaviour beats code appearance beats human attestation.
        return {"Dynamic": 0, "Static": 1, "Manual": 2}[self.value]


class ObservationError(ValueError):
    pass


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class Evidence:
    request: str
    response: str

    def as_dict(self) -> dict:
        return {"request": self.request, "response": self.response}


@dataclass(frozen=True)
class Observation:
    parameter_id: str
    value: str
    source: Source
    evidence: tuple[Evidence, ...] = ()
    note: str = ""
    captured_at: datetime = field(default_factory=utcnow, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "evidence", tuple(self.evidence))
        if not isinstance(self.value, str) or not self.value:
            raise ObservationError(f"{self.parameter_id}: empty observation value")
        if (self.source is not Source.Manual and self.value not in (NA, UNKNOWN)
                and not self.evidence):
            raise ObservationError(
                f"{self.parameter_id}: {self.source.value} value {self.value!r} needs evidence")

    @property
    def decided(self) -> bool:
        return self.value not in (NA, UNKNOWN)

    def key(self) -> tuple:
        """Identity without the capture time."""
        return (self.parameter_id, self.value, self.source, self.evidence, self.note)


@dataclass
class ProbeReport:
    """Output of one scan or static analysis run."""

    target: str
    source: Source
    observations: list[Observation] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)
    started_at: datetime = field(default_factory=utcnow)
    finished_at: datetime | None = None

    def covered_ids(self) -> list[str]:
        return [o.parameter_id for o in self.observations] + [pid for pid, _ in self.skipped]

    def observation(self, parameter_id: str) -> Observation | None:
        for obs in self.observations:
            if obs.parameter_id == parameter_id:
                return obs
        return None

    def values(self) -> dict[str, str]:
        return {o.parameter_id: o.value for o in self.observations}


def attestations(values: dict[str, str], note: str = "manual attestation") -> list[Observation]:
    """Human-supplied observations, e.g. loaded from an attestation file."""
    return [Observation(pid, str(v), Source.Manual, note=note) for pid, v in values.items()]


def evidence(pairs: Iterable[tuple[str, str]]) -> tuple[Evidence, ...]:
    return tuple(Evidence(req, resp) for req, resp in pairs)
