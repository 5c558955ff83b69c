from __future__ import annotations

import logging
import time
from typing import Iterator

import psutil
from pydantic import BaseModel, PrivateAttr, computed_field
from pydantic.fields import ComputedFieldInfo, FieldInfo
from rich.panel import Panel
from rich.table import Table

logger = logging.getLogger(__name__)


def titelify(name: str) -> str:
    return " ".join(word for word in name.split("_")).capitalize()


class Stats(BaseModel):
    def _populate_table(self, table: Table) -> None:
        for name, field in self.iter_fields():
            title = field.title or titelify(name)
            table.add_row(title, str(getattr(self, name)), style="dim")

    def iter_fields(self) -> Iterator[tuple[str, FieldInfo | ComputedFieldInfo]]:
        yield from self.model_fields.items()
        yield from self.model_computed_fields.items()

    def __rich__(self) -> Panel:
        table = Table(box=None, row_styles=["", "dim"])
        self._populate_table(table)
        return Panel(table, title=self.__class__.__name__)


class JobStats(Stats):
    label: str = "jobs"
    n_jobs: int = 0
    n_done: int = 0
    n_workers: int = 1

    _started: float = PrivateAttr(default_factory=time.perf_counter)

    def done(self) -> None:
        self.n_done += 1
        if self.n_jobs and self.n_done % max(self.n_jobs // 10, 1) == 0:
            logger.debug("%s: %d/%d jobs done", self.label, self.n_done, self.n_jobs)

    @computed_field
    @property
    def elapsed_seconds(self) -> float:
        return round(time.perf_counter() - self._started, 3)

    @computed_field
    @property
    def resident_memory_mb(self) -> float:
        return round(psutil.Process().memory_info().rss / 1024**2, 1)
