"""Trajectory serialization: CSV (one row per time) plus a JSON sidecar."""

__all__ = ["write_trajectory", "read_trajectory", "format_float"]

import csv
import json
from pathlib import Path

import numpy as np

from .integrators import Trajectory


def format_float(x):
    """Round-trippable text for a double; NaN becomes an empty cell."""
    x = float(x)
    return "" if np.isnan(x) else format(x, ".17g")


def _sidecar(path):
    path = Path(path)
    return path.with_suffix(path.suffix + ".json")


def write_trajectory(path, traj, metadata=None):
    """Write ``traj`` to ``path`` (CSV) and ``path + '.json'`` (sidecar).

    The CSV header is ``t,<label1>,...``; missing labels default to
    ``q0, q1, ...``. NaN entries (unobserved values) are written as empty
    cells.
    """
    path = Path(path)
    states = np.atleast_2d(traj.states)
    labels = list(traj.labels) or [f"q{i}" for i in range(states.shape[0])]
    if len(labels) != states.shape[0]:
        raise ValueError(f"{len(labels)} labels for {states.shape[0]} rows")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + labels)
        for j, t in enumerate(traj.times):
            writer.writerow([format_float(t)]
                            + [format_float(v) for v in states[:, j]])
    meta = {"n_state": states.shape[0], "n_times": int(traj.times.size),
            "labels": labels}
    meta.update(metadata or {})
    with open(_sidecar(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_trajectory(path):
    """Read a trajectory CSV; returns ``(Trajectory, metadata)``.

    Empty cells become NaN. Metadata is ``{}`` if no sidecar exists.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ValueError(f"{path}: first header column must be 't'")
    labels = rows[0][1:]
    data = np.array([[float(c) if c != "" else np.nan for c in row]
                     for row in rows[1:]], dtype=float).reshape(
                         -1, len(labels) + 1)
    meta = {}
    if _sidecar(path).exists():
        with open(_sidecar(path)) as fh:
            meta = json.load(fh)
    return Trajectory(data[:, 0], data[:, 1:].T, labels), meta
