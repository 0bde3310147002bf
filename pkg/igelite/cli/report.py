from __future__ import annotations

import csv
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import TYPE_CHECKING, Any

from igelite.encoding import encode, to_json
from igelite.hypotheses import Hypotheses, Provenance

if TYPE_CHECKING:  # pragma: no cover
    from igelite.tangency import ErrorBoundReport

logger = logging.getLogger("igelite.cli.report")

CSV_COLUMNS = ("delta", "max_ratio", "bound")


class ExitCode(IntEnum):
    OK = 0
    USAGE = 1
    FALSIFIED = 2
    HYPOTHESES = 3


class Outcome(Enum):
    VERIFIED = "verified"
    FALSIFIED = "falsified"
    HYPOTHESES_NOT_MET = "hypotheses-not-met"

    @property
    def exit_code(self) -> ExitCode:
        return {
            Outcome.VERIFIED: ExitCode.OK,
            Outcome.FALSIFIED: ExitCode.FALSIFIED,
            Outcome.HYPOTHESES_NOT_MET: ExitCode.HYPOTHESES,
        }[self]

    def worst(self, other: Outcome) -> Outcome:
        order = (Outcome.VERIFIED, Outcome.FALSIFIED, Outcome.HYPOTHESES_NOT_MET)
        return max(self, other, key=order.index)


@dataclass(frozen=True)
class Claim:
    value: Any
    provenance: Provenance


@dataclass(frozen=True)
class Report:
    command: str
    input_digest: str
    seed: int
    status: Outcome
    hypotheses: Hypotheses
    results: dict[str, Any]
    timings: dict[str, float] | None = field(default=None, compare=False)

    @property
    def exit_code(self) -> ExitCode:
        return self.status.exit_code

    def document(self) -> dict[str, Any]:
        document: dict[str, Any] = {
            "command": self.command,
            "input_digest": self.input_digest,
            "seed": self.seed,
            "status": encode(self.status),
            "hypotheses": encode(list(self.hypotheses)),
            "results": encode(self.results),
        }
        # wall-clock values would break byte-identical reruns
        if self.timings is not None:
            document["timings"] = encode(self.timings)
        return document


def to_document_json(report: Report) -> str:
    return to_json(report.document())


def write_json(report: Report, path: str | Path) -> None:
    Path(path).write_text(to_document_json(report), encoding="utf-8")
    logger.debug("wrote %s", path)


def write_csv(rows: Iterable[ErrorBoundReport], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([repr(row.delta), repr(row.max_ratio), repr(row.bound)])
    logger.debug("wrote %s", path)
