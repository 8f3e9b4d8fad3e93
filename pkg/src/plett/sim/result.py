"""Simulation outcome and per-step trace output."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class SimResult:
    kind: str
    seed: int
    rho_min_true: float
    events: dict[str, int]
    steps: int
    columns: tuple[str, ...]
    trace: np.ndarray
    lane_change_time: float | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trace.ndim != 2 or self.trace.shape[1] != len(self.columns):
            raise ValueError("trace shape does not match its columns")

    @property
    def m(self) -> int:
        """Total number of transmitted measurements."""
        return int(sum(self.events.values()))

    def column(self, name: str) -> np.ndarray:
        return self.trace[:, self.columns.index(name)]

    def digest(self) -> str:
        """Hash over every field, used to check bit-identical reruns."""
        h = hashlib.sha256()
        h.update(repr((self.kind, self.seed, self.rho_min_true, sorted(self.events.items()),
                       self.steps, self.columns, self.lane_change_time,
                       sorted(self.info.items()))).encode())
        h.update(np.ascontiguousarray(self.trace).tobytes())
        return h.hexdigest()

    def summary(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed, "rho_min_true": self.rho_min_true,
               "m": self.m, "steps": self.steps, "lane_change_time": self.lane_change_time}
        out.update({f"events_{k}": v for k, v in sorted(self.events.items())})
        return out

    def write_trace(self, path: str | Path) -> Path:
        """One CSV row per step; floats are written with ``repr`` so they round-trip."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(self.columns)
                for row in self.trace.tolist():
                    w.writerow([repr(v) for v in row])
        except OSError as exc:
            raise OSError(f"cannot write trace to {path}: {exc}") from exc
        return path


def read_trace(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return tuple(rows[0]), np.array([[float(v) for v in r] for r in rows[1:]])
