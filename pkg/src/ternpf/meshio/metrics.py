"""Metrics CSV: one row per emission."""
from __future__ import annotations

import csv
from pathlib import Path

METRIC_COLUMNS = (
    "step", "sim_time", "wall_seconds", "cells", "mlups", "front_z",
    "phase_fraction_1", "phase_fraction_2", "phase_fraction_3", "phase_fraction_4",
    "terms_skipped", "staggered_reuses",
)


class MetricsIOError(OSError):
    pass


def metrics_row(report, previous: tuple[int, float] | None = None) -> dict:
    """Row for a run report.

    ``wall_seconds`` is cumulative since the start of the run.  ``mlups``
    covers the interval since ``previous`` = (step, wall_seconds) of the
    preceding row, or the whole run when there is none.
    """
    step, wall = int(report.step), float(report.wall_time)
    if previous is not None and wall > previous[1]:
        mlups = report.cells * (step - previous[0]) / (wall - previous[1]) / 1e6
    else:
        mlups = report.mlups
    row = {
        "step": step, "sim_time": repr(float(report.t)), "wall_seconds": repr(wall), "cells": report.cells,
        "mlups": repr(float(mlups)), "front_z": report.front_z,
    }
    for a, f in enumerate(report.phase_fractions):
        row[f"phase_fraction_{a + 1}"] = repr(float(f))
    row["terms_skipped"] = report.counters.get("terms_skipped", 0)
    row["staggered_reuses"] = report.counters.get("staggered_reuses", 0)
    return row


def write_metrics(report, path, previous: tuple[int, float] | None = None) -> dict:
    """Append one row (writing the header first if the file is new)."""
    path = Path(path)
    row = metrics_row(report, previous)
    try:
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
            if new:
                w.writeheader()
            w.writerow(row)
    except OSError as exc:
        raise MetricsIOError(f"cannot write metrics {path}: {exc.strerror or exc}") from exc
    return row


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {}
        for k, v in r.items():
            d[k] = int(v) if k in ("step", "cells", "front_z", "terms_skipped", "staggered_reuses") else float(v)
        out.append(d)
    return out


class MetricsWriter:
    """Stateful sink that tracks the previous row for interval MLUP/s."""

    def __init__(self, path):
        self.path = Path(path)
        self.previous: tuple[int, float] | None = None

    def __call__(self, report) -> dict:
        row = write_metrics(report, self.path, self.previous)
        self.previous = (int(report.step), float(report.wall_time))
        return row
