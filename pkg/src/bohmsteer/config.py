"""Experiment configuration: a flat ``key = value`` text file.

Lengths are in metres, angles in degrees. Lists are comma separated.
Lines starting with ``#`` are comments.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    category = "config"


@dataclass(frozen=True)
class ExperimentConfig:
    wavelength: float = 808e-9
    packet_waist: float = 3e-4
    slit_separation: float = 3e-3
    plane_range: tuple[float, float] = (1.492, 4.500)
    plane_count: int = 45
    zeta: float = 336.0
    phi0: float = 0.0
    beta: float | str = 1.0  # or "auto": per-plane, window spans d/2 + 3 w(z)
    photon_budget: float = 1e7
    theta_list: tuple[float, ...] = (18.5, 31.4, 45.1, 62.9)
    z_switch_list: tuple[float, ...] = (1.492, 2.245, 3.038, 3.749)
    seeds: tuple[int, ...] = (20180101,)
    relative_phase: float = 0.0
    density_floor: float = 1e-12
    starts_per_packet: int = 16
    sensor_pixels: int = 512
    sensor_midline: float = 255.5
    count_floor: float = 10.0
    kernel_bandwidth_px: float = 1.0
    registration: str = "reference"
    map_x_half_width: float = 4e-3
    map_x_points: int = 641

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.beta != "auto" and not (isinstance(self.beta, (int, float)) and self.beta > 0):
            raise ConfigError("beta must be positive or 'auto'")
        for name in ("wavelength", "packet_waist", "slit_separation", "photon_budget",
                     "zeta", "kernel_bandwidth_px", "map_x_half_width"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        lo, hi = self.plane_range
        if not (lo > 0 and hi > lo):
            raise ConfigError("plane_range must be two increasing positive lengths")
        if self.plane_count < 2:
            raise ConfigError("plane_count must be >= 2")
        if any(not 0.0 <= t < 180.0 for t in self.theta_list):
            raise ConfigError("theta_list entries must lie in [0, 180) degrees")
        if any(z <= 0 for z in self.z_switch_list):
            raise ConfigError("z_switch_list entries must be positive")
        if self.starts_per_packet < 1:
            raise ConfigError("starts_per_packet must be >= 1")
        if self.registration not in ("reference", "coupled"):
            raise ConfigError("registration must be 'reference' or 'coupled'")
        if self.map_x_points < 2:
            raise ConfigError("map_x_points must be >= 2")

    # -- derived objects --------------------------------------------------

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    def packet(self):
        from .wavepacket import GaussianPacket
        return GaussianPacket(0.0, self.packet_waist, 0.0, self.wavenumber)

    def split_state(self):
        from .state import make_split_state
        return make_split_state(self.slit_separation, self.packet(), self.relative_phase)

    def grid(self):
        from .trajectory import PlaneGrid
        return PlaneGrid.uniform(self.plane_range[0], self.plane_range[1], self.plane_count)

    def coupling(self):
        from .weakmeas import CouplingModel
        return CouplingModel(self.zeta, self.phi0)

    def beta_at(self, z: float) -> float:
        if self.beta != "auto":
            return float(self.beta)
        from .weakmeas import HALF_WINDOW, PIXEL_PITCH_MM
        reach = 0.5 * self.slit_separation + 3.0 * float(self.packet().width(z))
        return HALF_WINDOW * PIXEL_PITCH_MM * 1e-3 / reach

    def layout(self, z: float | None = None):
        from .weakmeas import SensorLayout
        beta = self.beta_at(self.plane_range[0] if z is None else z)
        return SensorLayout(self.sensor_pixels, self.sensor_midline, beta=beta)

    def seed_positions(self) -> np.ndarray:
        from .trajectory import seed_positions
        d = self.slit_separation
        w = float(self.packet().width(self.plane_range[0]))
        return np.sort(seed_positions([-d / 2, d / 2], w, self.starts_per_packet))

    def map_x(self) -> np.ndarray:
        return np.linspace(-self.map_x_half_width, self.map_x_half_width, self.map_x_points)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_ALIASES = {"d": "slit_separation", "lambda": "wavelength", "w0": "packet_waist"}


def _convert(name: str, raw: str, lineno: int):
    kind = {f.name: f for f in dataclasses.fields(ExperimentConfig)}[name]
    default = kind.default
    try:
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            cast = int if default and isinstance(default[0], int) else float
            return tuple(cast(s) for s in items)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            if name == "beta" and raw.strip().lower() == "auto":
                return "auto"
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: cannot parse {name} = {raw!r} ({exc})") from None


def parse_config(text: str) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = _ALIASES.get(key.strip(), key.strip())
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw.strip(), lineno)
    if "plane_range" in values and len(values["plane_range"]) != 2:
        raise ConfigError("plane_range needs exactly two values")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {', '.join(map(repr, v)) if isinstance(v, tuple) else v}")
    return "\n".join(lines) + "\n"
