"""Average-trajectory reconstruction by explicit Euler steps between planes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import (SPEED_OF_LIGHT, BranchState, NodeError, Outcome, ProjectionBasis,
                    VelocityField, project)


@dataclass(frozen=True)
class PlaneGrid:
    planes: tuple[float, ...]

    def __post_init__(self):
        z = np.asarray(self.planes, dtype=float)
        if z.ndim != 1 or z.size < 2:
            raise ValueError("a plane grid needs at least two planes")
        if not np.all(np.isfinite(z)) or not np.all(np.diff(z) > 0):
            raise ValueError("plane positions must be finite and strictly increasing")

    @classmethod
    def uniform(cls, start: float, stop: float, count: int) -> "PlaneGrid":
        return cls(tuple(np.linspace(start, stop, count).tolist()))

    @property
    def z(self) -> np.ndarray:
        return np.asarray(self.planes, dtype=float)

    def index_of(self, z: float, atol: float = 1e-9) -> int:
        """Index of the plane at ``z``; raises ValueError if off-grid."""
        i = int(np.argmin(np.abs(self.z - z)))
        if abs(self.z[i] - z) > atol:
            raise ValueError(f"z={z} is not a grid plane")
        return i

    def nearest(self, z: float) -> float:
        return float(self.z[np.argmin(np.abs(self.z - z))])

    def refined(self) -> "PlaneGrid":
        """Insert a plane midway between every adjacent pair."""
        z = self.z
        out = np.empty(2 * z.size - 1)
        out[0::2] = z
        out[1::2] = 0.5 * (z[:-1] + z[1:])
        return PlaneGrid(tuple(out.tolist()))


@dataclass
class Trajectory:
    x: np.ndarray
    z: np.ndarray
    branch_z: float | None = None
    outcome_label: tuple[float, Outcome] | None = None  # (theta in degrees, outcome)
    error: str | None = None

    @property
    def complete(self) -> bool:
        return self.error is None

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.z.tolist()))


def euler_step(x, z: float, z_next: float, v, c: float = SPEED_OF_LIGHT):
    """x + (z_next - z) v / sqrt(c^2 - v^2)."""
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= c):
        raise ValueError("|v| must be below the speed of light")
    if not z_next > z:
        raise ValueError("planes must advance")
    return x + (z_next - z) * v / np.sqrt(c * c - v * v)


def _trace_many(x0, zs, field_at, c, midpoint=False):
    """Step an array of starts through ``zs``; ``field_at(j)`` gives the field
    used on the step leaving plane j. Returns (xs, failed_at) where failed_at
    holds the first plane index whose velocity was undefined (or -1)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    xs = np.full((x0.size, zs.size), np.nan)
    xs[:, 0] = x0
    failed = np.full(x0.size, -1)
    alive = np.ones(x0.size, dtype=bool)
    for j in range(zs.size - 1):
        fld = field_at(j)
        xj = xs[alive, j]
        v = np.ma.filled(fld.velocity(xj, zs[j], strict=False), np.nan)
        if midpoint:
            zm = 0.5 * (zs[j] + zs[j + 1])
            xm = np.where(np.isfinite(v), xj + (zm - zs[j]) * v / np.sqrt(c**2 - np.nan_to_num(v) ** 2), xj)
            vm = np.ma.filled(fld.velocity(xm, zm, strict=False), np.nan)
            v = np.where(np.isfinite(v), vm, np.nan)
        bad = ~np.isfinite(v) | (np.abs(np.nan_to_num(v)) >= c)
        idx = np.flatnonzero(alive)
        failed[idx[bad]] = j
        alive[idx[bad]] = False
        good = ~bad
        xs[idx[good], j + 1] = euler_step(xj[good], zs[j], zs[j + 1], v[good], c)
    return xs, failed


def _package(xs, failed, zs, **labels):
    out = []
    for row, f in zip(xs, failed):
        if f >= 0:
            out.append(Trajectory(row[: f + 1].copy(), zs[: f + 1].copy(),
                                  error=f"node at z={zs[f]:.6g}", **labels))
        else:
            out.append(Trajectory(row.copy(), zs.copy(), **labels))
    return out


def trace_many(x0, grid: PlaneGrid, field, midpoint: bool = False) -> list[Trajectory]:
    """Trace every start in ``x0`` through ``grid`` under one field.

    ``field`` is anything with ``velocity(x, z, strict=...)`` and a
    ``light_speed_c`` attribute.
    """
    zs = grid.z
    xs, failed = _trace_many(x0, zs, lambda j: field, field.light_speed_c, midpoint)
    return _package(xs, failed, zs)


def trace(x0: float, grid: PlaneGrid, field, midpoint: bool = False) -> Trajectory:
    return trace_many([x0], grid, field, midpoint)[0]


def trace_steered_many(x0, grid: PlaneGrid, z_switch: float, before, after,
                       label: tuple[float, Outcome] | None = None,
                       midpoint: bool = False) -> list[Trajectory]:
    """Follow ``before`` on planes below ``z_switch`` and ``after`` from it on."""
    k_switch = grid.index_of(z_switch)
    zs = grid.z
    xs, failed = _trace_many(x0, zs, lambda j: before if j < k_switch else after,
                             before.light_speed_c, midpoint)
    return _package(xs, failed, zs, branch_z=float(zs[k_switch]), outcome_label=label)


def trace_steered(x0: float, grid: PlaneGrid, z_switch: float, basis: ProjectionBasis,
                  outcome: Outcome, state: BranchState, wavenumber_k: float,
                  light_speed_c: float = SPEED_OF_LIGHT, density_floor: float = 1e-12,
                  midpoint: bool = False) -> Trajectory:
    before = VelocityField(state, wavenumber_k, light_speed_c, density_floor)
    projected, _ = project(state, basis, outcome)
    after = VelocityField(projected, wavenumber_k, light_speed_c, density_floor)
    return trace_steered_many([x0], grid, z_switch, before, after,
                              label=(basis.degrees, outcome), midpoint=midpoint)[0]


def velocity_change_map(state: BranchState, x, z, basis: ProjectionBasis, outcome: Outcome,
                        wavenumber_k: float, light_speed_c: float = SPEED_OF_LIGHT,
                        density_floor: float = 1e-12) -> np.ma.MaskedArray:
    """Delta v / c on the (z, x) grid; rows follow ``z``. Nodes are masked."""
    x = np.asarray(x, dtype=float)
    projected, _ = project(state, basis, outcome)
    before = VelocityField(state, wavenumber_k, light_speed_c, density_floor)
    after = VelocityField(projected, wavenumber_k, light_speed_c, density_floor)
    rows = [after.k_ratio(x, zj, strict=False) - before.k_ratio(x, zj, strict=False)
            for zj in np.asarray(z, dtype=float)]
    return np.ma.vstack(rows)


def seed_positions(centers, width: float, per_packet: int = 16) -> np.ndarray:
    """``per_packet`` equally spaced starts within +-2 width of each center."""
    return np.concatenate([np.linspace(c - 2 * width, c + 2 * width, per_packet)
                           for c in centers])


__all__ = ["NodeError", "PlaneGrid", "Trajectory", "euler_step", "trace", "trace_many",
           "trace_steered", "trace_steered_many", "velocity_change_map", "seed_positions"]
