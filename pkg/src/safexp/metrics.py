"""Metrics CSV with a fixed, documented schema.

Columns, in order:

    run_id, algorithm, seed, epoch,
    j_u, j_r, j_c1            (discounted per-episode returns),
    ret_u, ret_r, ret_c1      (undiscounted per-episode returns),
    branch, dual_case, kl, step_norm, backtracks, accepted

Floats are rendered with ``repr`` (shortest round-trip), so identical runs
produce bitwise-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .engine import EpochReport

COLUMNS = (
    "run_id", "algorithm", "seed", "epoch",
    "j_u", "j_r", "j_c1", "ret_u", "ret_r", "ret_c1",
    "branch", "dual_case", "kl", "step_norm", "backtracks", "accepted",
)

_FLOAT_COLS = {"j_u", "j_r", "j_c1", "ret_u", "ret_r", "ret_c1", "kl", "step_norm"}
_INT_COLS = {"seed", "epoch", "backtracks", "accepted"}


@dataclass
class MetricsRow:
    run_id: str
    algorithm: str
    seed: int
    epoch: int
    j_u: float
    j_r: float
    j_c1: float
    ret_u: float
    ret_r: float
    ret_c1: float
    branch: str
    dual_case: str
    kl: float
    step_norm: float
    backtracks: int
    accepted: bool


def row_from_report(run_id: str, algorithm: str, seed: int, rep: EpochReport) -> MetricsRow:
    return MetricsRow(
        run_id=run_id, algorithm=algorithm, seed=seed, epoch=rep.epoch,
        j_u=rep.j_u, j_r=rep.j_r, j_c1=rep.j_c1,
        ret_u=rep.ret_u, ret_r=rep.ret_r, ret_c1=rep.ret_c1,
        branch=rep.branch, dual_case=rep.dual_case, kl=rep.kl,
        step_norm=rep.step_norm, backtracks=rep.backtracks, accepted=rep.accepted,
    )


def _render(row: MetricsRow) -> list[str]:
    out = []
    for col in COLUMNS:
        v = getattr(row, col)
        if col in _FLOAT_COLS:
            out.append(repr(float(v)))
        elif col == "accepted":
            out.append(str(int(v)))
        else:
            out.append(str(v))
    return out


def write_metrics(path, rows: list[MetricsRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow(_render(row))


def read_metrics(path) -> list[dict]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        rows = []
        for rec in reader:
            parsed: dict = dict(rec)
            for col in _FLOAT_COLS:
                parsed[col] = float(rec[col])
            for col in _INT_COLS:
                parsed[col] = int(rec[col])
            parsed["accepted"] = bool(parsed["accepted"])
            rows.append(parsed)
        return rows
