from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass, replace
from enum import Enum


class Provenance(Enum):
    EXACT = "exact"
    CERTIFICATE = "certificate"
    SAMPLED = "sampled-evidence"
    ORACLE = "oracle"


class Status(Enum):
    VERIFIED = "verified"
    FAILED = "failed"
    # holds by construction for the supported mapping class, not checked at runtime
    ASSUMED = "assumed"


@dataclass(frozen=True)
class Hypothesis:
    name: str
    status: Status
    provenance: Provenance
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.status is not Status.FAILED


@dataclass(frozen=True)
class Hypotheses:
    items: tuple[Hypothesis, ...] = ()

    def __iter__(self) -> Iterator[Hypothesis]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, name: object) -> bool:
        return any(item.name == name for item in self.items)

    def get(self, name: str) -> Hypothesis:
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)

    def add(self, hypothesis: Hypothesis) -> Hypotheses:
        kept = tuple(item for item in self.items if item.name != hypothesis.name)
        return replace(self, items=(*kept, hypothesis))

    def merge(self, other: Hypotheses) -> Hypotheses:
        result = self
        for item in other:
            result = result.add(item)
        return result

    @property
    def failed(self) -> tuple[Hypothesis, ...]:
        return tuple(item for item in self.items if not item.holds)

    @property
    def all_hold(self) -> bool:
        return not self.failed


# shared hypothesis names
REFERENCE_SOLUTION = "reference point solves the problem"
SEMICONTINUITY = "F is lower and Hausdorff C-upper semicontinuous"
OUTER_PREDERIVATIVE = "fan is an outer prederivative"
INNER_PREDERIVATIVE = "fan is an inner prederivative"
STRICT_PREDERIVATIVE = "fan is a strict prederivative"
METRIC_INCREASE = "F is metrically C-increasing"
ZERO_IN_VALUE = "0 ∈ F(x̄)"
BOUNDARY_CONTACT = "F(x̄) meets the boundary of C"
