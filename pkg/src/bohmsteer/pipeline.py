"""Synthetic acquisition of detector images and the per-plane reconstruction.

Every plane gets exposures for a set of labelled states of photon B:

* ``H`` and ``V``: partner projected on |H> / |V>, used only to locate the
  lobe centers (x1..x4) that register the two camera strips;
* ``unprojected``: partner not measured;
* ``theta<deg>_<Outcome>``: partner projected on the rotated basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .state import SPEED_OF_LIGHT, NodeError, Outcome, ProjectionBasis, VelocityField, project
from .weakmeas import (CouplingModel, MomentumProfile, NoNeighborError, extract_weak_momentum,
                       fit_gaussian_center, interpolate_momentum, synthesize_images,
                       window_and_normalize)

REGISTRATION_LABELS = ("H", "V")


def steer_label(theta_deg: float, outcome: Outcome) -> str:
    return f"theta{theta_deg:g}_{outcome.value}"


def parse_steer_label(label: str) -> tuple[float, Outcome]:
    head, _, tail = label.partition("_")
    return float(head.removeprefix("theta")), Outcome.parse(tail)


def labelled_states(config, steer: list[tuple[float, Outcome]] | None = None) -> dict:
    """Label -> BranchState for every exposure taken at a plane."""
    split = config.split_state()
    states = {
        "H": project(split, ProjectionBasis(0.0), Outcome.THETA)[0],
        "V": project(split, ProjectionBasis(np.pi / 2), Outcome.THETA)[0],
        "unprojected": split,
    }
    if steer is None:
        steer = [(t, Outcome.THETA) for t in config.theta_list]
    for theta, outcome in steer:
        states[steer_label(theta, outcome)] = project(
            split, ProjectionBasis.from_degrees(theta), outcome)[0]
    return states


def exposure_seed(seed: int, plane_index: int, label: str) -> int:
    """Independent per-exposure seed derived from the run seed."""
    key = [int(b) for b in label.encode()]
    ss = np.random.SeedSequence([int(seed), int(plane_index), *key])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# Registration exposures taken with the coupling element out of the beam.
_UNCOUPLED = SimpleNamespace(zeta=0.0, phi0=0.0)


def emulate_plane(config, plane_index: int, seed: int, states: dict) -> dict:
    """Label -> (R image, L image) at one plane."""
    z = float(config.grid().z[plane_index])
    model = config.coupling()
    layout = config.layout(z)
    out = {}
    for label, state in states.items():
        field = VelocityField(state, config.wavenumber, density_floor=config.density_floor)
        use = model
        if label in REGISTRATION_LABELS and config.registration == "reference":
            use = _UNCOUPLED
        out[label] = synthesize_images(field, z, use, config.photon_budget,
                                       exposure_seed(seed, plane_index, label), layout, label)
    return out


@dataclass
class PlaneReconstruction:
    plane_z: float
    centers_r: tuple[float, float]
    centers_l: tuple[float, float]
    profiles: dict  # label -> MomentumProfile


def reconstruct_plane(images: dict, model: CouplingModel, count_floor: float = 10.0) -> PlaneReconstruction:
    """Run the four-center registration and extraction for every non-registration label."""
    x1, x3 = (fit_gaussian_center(im) for im in images["H"])
    x2, x4 = (fit_gaussian_center(im) for im in images["V"])
    z = images["H"][0].plane_z
    profiles = {}
    for label, (img_r, img_l) in images.items():
        if label in REGISTRATION_LABELS:
            continue
        pair = window_and_normalize(img_r, img_l, (x1, x2), (x3, x4))
        prof = extract_weak_momentum(pair, model, count_floor)
        prof.plane_z = z
        profiles[label] = prof
    return PlaneReconstruction(z, (x1, x2), (x3, x4), profiles)


class SampledVelocityField:
    """Velocity field tabulated on pixel samples at each imaging plane.

    Queries must fall on one of the tabulated planes; between pixels a
    Gaussian kernel estimate is used whose width is ``bandwidth_px`` times
    that plane's pixel spacing in object space.
    """

    def __init__(self, profiles, bandwidth_px: float = 1.0, light_speed_c: float = SPEED_OF_LIGHT):
        self.profiles = sorted(profiles, key=lambda p: p.plane_z)
        self._z = np.array([p.plane_z for p in self.profiles])
        self._bw = [bandwidth_px * abs(float(np.median(np.diff(p.positions_m)))) for p in self.profiles]
        self.light_speed_c = light_speed_c

    def _index(self, z: float) -> int:
        j = int(np.argmin(np.abs(self._z - z)))
        if abs(self._z[j] - z) > 1e-9:
            raise ValueError(f"no reconstructed profile at z={z}")
        return j

    def k_ratio(self, x, z, strict: bool = True):
        j = self._index(z)
        prof, bw = self.profiles[j], self._bw[j]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(x.size)
        bad = np.zeros(x.size, dtype=bool)
        for n, xq in enumerate(x):
            try:
                out[n] = interpolate_momentum(prof.positions_m, prof.k_ratio, xq, bw)
            except NoNeighborError as exc:
                if strict:
                    raise NodeError(str(exc)) from exc
                bad[n] = True
        return out if strict else np.ma.masked_array(out, mask=bad)

    def velocity(self, x, z, strict: bool = True):
        return self.light_speed_c * self.k_ratio(x, z, strict=strict)
