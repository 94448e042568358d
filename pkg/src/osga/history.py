"""Per-iteration run records."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = ["iter", "f_best", "eta", "alpha", "R", "accepted", "n_f", "n_g", "wall_time_s"]


@dataclass(frozen=True)
class IterationRecord:
    """State after one iteration, plus the quantities the step produced.

    ``eta`` and ``alpha_next`` describe the state after the update scheme;
    ``eta_prev``, ``alpha``, ``eta_bar`` and ``g_norm_dual`` are the values
    the step itself worked with.  The init record (iteration 0) carries no
    step data.
    """

    iteration: int
    f_best: float
    eta: float
    alpha_next: float
    n_f: int
    n_g: int
    wall_time: float
    eta_prev: float | None = None
    eta_bar: float | None = None
    alpha: float | None = None
    R: float | None = None
    g_norm_dual: float | None = None
    accepted: bool = False

    @property
    def is_init(self) -> bool:
        return self.iteration == 0


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class RunHistory:
    records: list[IterationRecord] = field(default_factory=list)

    def append(self, rec: IterationRecord) -> None:
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise ValueError("iteration indices must increase")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def steps(self) -> list[IterationRecord]:
        return [r for r in self.records if not r.is_init]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, include_wall_time: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow([
                r.iteration,
                _fmt(r.f_best),
                _fmt(r.eta),
                _fmt(r.alpha_next),
                "" if r.R is None else _fmt(r.R),
                int(r.accepted),
                r.n_f,
                r.n_g,
                _fmt(r.wall_time) if include_wall_time else "",
            ])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
