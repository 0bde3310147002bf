from __future__ import annotations

import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from igelite.increase import IncreaseGrid
from igelite.tangency import HypothesisSettings

if TYPE_CHECKING:  # pragma: no cover
    from igelite.cli.problem import LoadedProblem
    from igelite.fans import Fan
    from igelite.mappings import IGEProblem
    from igelite.numkit import Tolerances

logger = logging.getLogger("igelite.cli")


@dataclass(frozen=True)
class RunSettings:
    alpha: float = 1.05
    delta: float = 0.1
    samples: int = 500
    probe_dirs: int = 64
    mode: str = "exact"
    grid: IncreaseGrid = field(default_factory=IncreaseGrid)

    @property
    def hypotheses(self) -> HypothesisSettings:
        return HypothesisSettings(delta=self.delta, alpha=self.alpha, grid=self.grid)


class CommandContext:
    name: str
    loaded: LoadedProblem
    settings: RunSettings
    seed: int
    timings: dict[str, float]

    def __init__(self, name: str, loaded: LoadedProblem, settings: RunSettings, seed: int) -> None:
        self.name = name
        self.loaded = loaded
        self.settings = settings
        self.seed = seed
        self.timings = {}

    @property
    def problem(self) -> IGEProblem:
        return self.loaded.problem

    @property
    def fan(self) -> Fan | None:
        return self.loaded.fan

    @property
    def tol(self) -> Tolerances:
        return self.loaded.tolerances

    def log(self, msg: str, level: int = logging.INFO) -> None:
        if not logger.isEnabledFor(level):  # pragma: no cover
            return
        logger.log(level, "%s %s", self.name, msg)

    @contextmanager
    def timed(self, section: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[section] = time.perf_counter() - start
            self.log(f"{section} took {self.timings[section]:.3f}s", logging.DEBUG)
