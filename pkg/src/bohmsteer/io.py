"""CSV serialisation of trajectories, velocity maps and reconstructed profiles.

Floats are written with 17 significant digits so a write/read cycle is
lossless; missing values are empty fields.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ("trajectory_id", "z_m", "x_m", "branch_flag", "theta_deg", "outcome")
MAP_COLUMNS = ("x_m", "z_m", "dv_over_c")
PROFILE_COLUMNS = ("z_m", "x_m", "v_over_c")


def fmt(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if not np.isfinite(value):
        return ""
    return f"{value:.16e}"


def parse_float(text: str):
    return None if text == "" else float(text)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trajectory_rows(trajectories, start_id: int = 0):
    """Rows for a list of Trajectory objects; ids are assigned sequentially."""
    rows = []
    for n, traj in enumerate(trajectories, start=start_id):
        theta, outcome = (None, "none") if traj.outcome_label is None else (
            traj.outcome_label[0], traj.outcome_label[1].value)
        for x, z in zip(traj.x, traj.z):
            flag = int(traj.branch_z is not None and z >= traj.branch_z - 1e-12)
            rows.append((n, fmt(z), fmt(x), flag, fmt(theta), outcome))
    return rows


def write_trajectories(path, trajectories) -> None:
    atomic_write_text(path, _csv_text(TRAJECTORY_COLUMNS, trajectory_rows(trajectories)))


def read_trajectories(path) -> dict[int, dict]:
    """Group a trajectory CSV by id: {id: {"z", "x", "branch_flag", "theta_deg", "outcome"}}."""
    groups: dict[int, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected trajectory columns {reader.fieldnames}")
        for row in reader:
            g = groups.setdefault(int(row["trajectory_id"]), {
                "z": [], "x": [], "branch_flag": [],
                "theta_deg": parse_float(row["theta_deg"]), "outcome": row["outcome"]})
            g["z"].append(float(row["z_m"]))
            g["x"].append(float(row["x_m"]))
            g["branch_flag"].append(int(row["branch_flag"]))
    for g in groups.values():
        g["z"], g["x"] = np.array(g["z"]), np.array(g["x"])
    return groups


def write_map(path, x, z, dv_over_c) -> None:
    """One row per (z, x) grid point of a masked (len(z), len(x)) array."""
    dv = np.ma.asarray(dv_over_c)
    rows = []
    for j, zj in enumerate(z):
        for i, xi in enumerate(x):
            val = None if dv.mask is not np.ma.nomask and np.ma.getmaskarray(dv)[j, i] else dv.data[j, i]
            rows.append((fmt(xi), fmt(zj), fmt(val)))
    atomic_write_text(path, _csv_text(MAP_COLUMNS, rows))


def read_map(path):
    """Returns (x, z, masked dv_over_c array)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MAP_COLUMNS:
            raise ValueError(f"{path}: unexpected map columns {reader.fieldnames}")
        recs = [(float(r["x_m"]), float(r["z_m"]), parse_float(r["dv_over_c"])) for r in reader]
    xs = sorted({r[0] for r in recs})
    zs = sorted({r[1] for r in recs})
    xi = {v: i for i, v in enumerate(xs)}
    zi = {v: j for j, v in enumerate(zs)}
    data = np.zeros((len(zs), len(xs)))
    mask = np.ones_like(data, dtype=bool)
    for x, z, v in recs:
        if v is not None:
            data[zi[z], xi[x]] = v
            mask[zi[z], xi[x]] = False
    return np.array(xs), np.array(zs), np.ma.masked_array(data, mask=mask)


def write_profiles(path, profiles) -> None:
    """Reconstructed per-pixel velocities; ``profiles`` is an iterable of MomentumProfile."""
    rows = []
    for prof in profiles:
        k = np.ma.asarray(prof.k_ratio)
        m = np.ma.getmaskarray(k)
        for x, v, bad in zip(prof.positions_m, k.data, m):
            rows.append((fmt(prof.plane_z), fmt(x), fmt(None if bad else v)))
    atomic_write_text(path, _csv_text(PROFILE_COLUMNS, rows))


def read_profiles(path):
    """Returns {z: (x array, masked v_over_c array)}."""
    out: dict[float, tuple[list, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PROFILE_COLUMNS:
            raise ValueError(f"{path}: unexpected profile columns {reader.fieldnames}")
        for r in reader:
            xs, vs = out.setdefault(float(r["z_m"]), ([], []))
            xs.append(float(r["x_m"]))
            vs.append(parse_float(r["v_over_c"]))
    result = {}
    for z, (xs, vs) in out.items():
        mask = np.array([v is None for v in vs])
        data = np.array([0.0 if v is None else v for v in vs])
        result[z] = (np.array(xs), np.ma.masked_array(data, mask=mask))
    return result
