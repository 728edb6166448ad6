"""CSV and metadata writers. Floats are written with ``repr`` so output is
bit-identical across runs and round-trips exactly."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import ClassId

EULER_COLUMNS = ("t", "x", "rho_ptw", "rho_car", "v_ptw", "v_car")
CLUSTER_COLUMNS = ("t", "class", "cluster_index", "position", "spacing", "speed")
CARRIER_COLUMNS = CLUSTER_COLUMNS + ("carried_spacing",)
TRAJECTORY_COLUMNS = ("t", "vehicle_id", "class", "sublane", "position", "speed")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, ClassId):
        return value.name.lower()
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path: Path | str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def euler_rows(snapshots, law):
    for st in snapshots:
        v1, v2 = law.speeds(st.rho_ptw, st.rho_car)
        for x, r1, r2, a, b in zip(st.x, st.rho_ptw, st.rho_car, v1, v2):
            yield (st.t, x, r1, r2, a, b)


def lag1_rows(runs):
    """Rows for Lag1Run snapshots; ``position`` is the cluster head."""
    for run in runs:
        v_ptw, v_car = run.speeds()
        for f, v in ((run.ptw, v_ptw), (run.car, v_car)):
            for k in range(len(f)):
                yield (run.t, f.class_id, k, f.edges[k], f.spacing[k], v[k])


def lag2_rows(runs):
    for run in runs:
        f = run.field
        v_r, _ = f.speeds(run.cfg.law())
        s_c = f.s_c
        for k in range(len(f.y)):
            yield (run.t, f.reference_class_id, k, f.reference.edges[k], f.s_r[k], v_r[k], s_c[k])


def trajectory_rows(snaps):
    for veh, speed in snaps:
        for i in range(len(veh)):
            yield (veh.t, veh.ids[i], ClassId(int(veh.cls[i])), veh.sublane[i], veh.position[i], speed[i])


def write_profiles(path, x, series: Mapping[str, np.ndarray]) -> Path:
    names = list(series)
    cols = [np.asarray(series[n]) for n in names]
    return write_csv(path, ["x", *names], ([xi, *(c[i] for c in cols)] for i, xi in enumerate(x)))


def write_metrics(path, metrics: Mapping[str, object]) -> Path:
    return write_csv(path, ("metric", "value"), sorted(metrics.items()))


def write_metadata(path, meta: Mapping[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in meta.items()))
    return path
