"""CSV writers and readers. Floats are written as the shortest string that
reads back to the same double, so reruns of a deterministic computation
produce identical bytes and nothing is lost on reload."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .analysis import CSV_COLUMNS, identity_residual

SPECTRUM_COLUMNS = ("index", "re", "im", "branch")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def write_dicts(path, rows: list[dict]) -> Path:
    header = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    return write_rows(path, header, [[r.get(k) for k in header] for r in rows])


def write_trajectory(path, traj) -> Path:
    _, r = identity_residual(traj)
    cols = [traj.t, traj.E, traj.kinetic, traj.potential, traj.nl_potential,
            traj.cum_diss_kv, traj.cum_diss_fric, r]
    return write_rows(path, CSV_COLUMNS, zip(*cols))


def write_spectrum(path, report) -> Path:
    branch_of = {}
    if report.branch_index is not None:
        branch_of = {int(i): j + 1 for j, i in enumerate(report.branch_index)}
    rows = [(i, z.real, z.imag, branch_of.get(i)) for i, z in enumerate(report.eigenvalues)]
    return write_rows(path, SPECTRUM_COLUMNS, rows)


def read_table(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(x) if x != "" else np.nan for x in row] for row in r]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))


class TrajectoryTable:
    """Column view of a trajectory CSV, usable wherever a trajectory is expected."""

    def __init__(self, path):
        header, data = read_table(path)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path} is not a trajectory CSV")
        self.path = Path(path)
        for i, name in enumerate(header):
            setattr(self, name, data[:, i])


def is_trajectory_csv(path) -> bool:
    try:
        with Path(path).open() as fh:
            return fh.readline().strip() == ",".join(CSV_COLUMNS)
    except OSError:
        return False


def is_spectrum_csv(path) -> bool:
    try:
        with Path(path).open() as fh:
            return fh.readline().strip() == ",".join(SPECTRUM_COLUMNS)
    except OSError:
        return False
