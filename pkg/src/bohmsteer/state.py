"""Photon-B state before and after the remote polarisation projection.

The unprojected state is two mutually incoherent branches (one per
polarisation of the entangled partner). Projecting the partner onto
cos(theta)|H> - sin(theta)|V> or its orthogonal complement leaves a single
coherent superposition of the two displaced packets.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .wavepacket import GaussianPacket, evaluate, gradient, overlap

SPEED_OF_LIGHT = 299_792_458.0


class NodeError(ArithmeticError):
    """Velocity is undefined because the density vanishes (to the floor)."""

    category = "node"


class Outcome(enum.Enum):
    THETA = "Theta"
    THETA_BAR = "ThetaBar"

    @classmethod
    def parse(cls, text: str) -> "Outcome":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown outcome {text!r}; expected Theta or ThetaBar")


@dataclass(frozen=True)
class ProjectionBasis:
    theta: float  # radians

    def __post_init__(self):
        if not 0.0 <= self.theta < np.pi:
            raise ValueError(f"theta must lie in [0, pi), got {self.theta}")

    @classmethod
    def from_degrees(cls, degrees: float) -> "ProjectionBasis":
        return cls(np.deg2rad(degrees))

    @property
    def degrees(self) -> float:
        return float(np.rad2deg(self.theta))


@dataclass(frozen=True)
class Branch:
    weight: complex
    packets: tuple[tuple[complex, GaussianPacket], ...]

    def __post_init__(self):
        if not self.packets:
            raise ValueError("a branch needs at least one packet")

    def amplitude(self, x, z):
        return sum(c * evaluate(p, x, z) for c, p in self.packets)

    def derivative(self, x, z):
        return sum(c * gradient(p, x, z) for c, p in self.packets)

    def norm_squared(self) -> float:
        total = 0.0 + 0.0j
        for ci, pi in self.packets:
            for cj, pj in self.packets:
                total += np.conj(ci) * cj * overlap(pi, pj)
        return float(total.real)

    def peak_density_bound(self, z):
        # Triangle inequality on the coherent sum.
        return sum(abs(c) * np.sqrt(p.peak_density(z)) for c, p in self.packets) ** 2


@dataclass(frozen=True)
class BranchState:
    branches: tuple[Branch, ...]

    def __post_init__(self):
        if not self.branches:
            raise ValueError("a state needs at least one branch")

    def norm_squared(self) -> float:
        return sum(abs(b.weight) ** 2 * b.norm_squared() for b in self.branches)

    def density(self, x, z):
        return sum(abs(b.weight) ** 2 * np.abs(b.amplitude(x, z)) ** 2 for b in self.branches)

    def current(self, x, z):
        """Sum over branches of |w|^2 Im(psi* dpsi/dx); units of k times density."""
        return sum(abs(b.weight) ** 2 * np.imag(np.conj(b.amplitude(x, z)) * b.derivative(x, z))
                   for b in self.branches)

    def peak_density_bound(self, z):
        return sum(abs(b.weight) ** 2 * b.peak_density_bound(z) for b in self.branches)

    def with_branch_phase(self, index: int, phase: float) -> "BranchState":
        branches = list(self.branches)
        b = branches[index]
        branches[index] = Branch(b.weight * np.exp(1j * phase), b.packets)
        return BranchState(tuple(branches))

    def with_packet_phase(self, branch: int, packet: int, phase: float) -> "BranchState":
        branches = list(self.branches)
        b = branches[branch]
        packets = list(b.packets)
        c, p = packets[packet]
        packets[packet] = (c * np.exp(1j * phase), p)
        branches[branch] = Branch(b.weight, tuple(packets))
        return BranchState(tuple(branches))


def make_split_state(d: float, packet_template: GaussianPacket,
                     relative_phase: float = 0.0) -> BranchState:
    """Two incoherent branches with packets at -d/2 and +d/2.

    The template's ``center_x`` is ignored. ``relative_phase`` is a residual
    optical path difference applied to the +d/2 packet.
    """
    if not d > 0:
        raise ValueError(f"split distance must be positive, got {d}")
    base = packet_template.shifted(-packet_template.center_x)
    left = base.shifted(-0.5 * d)
    right = base.shifted(+0.5 * d)
    w = 1.0 / np.sqrt(2.0)
    return BranchState((
        Branch(w, ((1.0 + 0.0j, left),)),
        Branch(w, ((np.exp(1j * relative_phase), right),)),
    ))


def _split_components(state: BranchState):
    if len(state.branches) != 2:
        raise ValueError("projection needs a two-branch split state")
    return [tuple((b.weight * c, p) for c, p in b.packets) for b in state.branches]


def project(state: BranchState, basis: ProjectionBasis,
            outcome: Outcome) -> tuple[BranchState, float]:
    """Condition the split state on the partner's outcome.

    Returns the normalised single-branch state and the outcome probability.
    """
    left, right = _split_components(state)
    cos, sin = np.cos(basis.theta), np.sin(basis.theta)
    if outcome is Outcome.THETA:
        a, b = cos, -sin
    else:
        a, b = sin, cos
    packets = tuple((a * c, p) for c, p in left if a != 0) + \
        tuple((b * c, p) for c, p in right if b != 0)
    unnormalised = Branch(1.0, packets)
    prob = unnormalised.norm_squared()
    if prob <= 0.0:
        raise ValueError("projection outcome has zero probability")
    return BranchState((Branch(1.0 / np.sqrt(prob), packets),)), prob


def outcome_probabilities(state: BranchState, basis: ProjectionBasis) -> dict[Outcome, float]:
    _, p = project(state, basis, Outcome.THETA)
    return {Outcome.THETA: p, Outcome.THETA_BAR: 1.0 - p}


@dataclass(frozen=True)
class VelocityField:
    """Transverse Bohmian velocity v_x(x, z) = c <k_x>_w / k of a state.

    ``density_floor`` is relative to an analytic upper bound on the state's
    peak density at the queried plane.
    """

    state: BranchState
    wavenumber_k: float
    light_speed_c: float = SPEED_OF_LIGHT
    density_floor: float = 1e-12

    def _masked(self, x, z):
        x = np.asarray(x, dtype=float)
        rho = self.state.density(x, z)
        j = self.state.current(x, z)
        floor = self.density_floor * self.state.peak_density_bound(z)
        ok = rho > floor
        ratio = np.divide(j, rho * self.wavenumber_k, out=np.zeros_like(j, dtype=float), where=ok)
        return ratio, ok

    def k_ratio(self, x, z, strict: bool = True):
        """<k_x>_w / k. Non-strict mode returns a masked array at nodes."""
        ratio, ok = self._masked(x, z)
        if strict:
            if not np.all(ok):
                bad = np.asarray(x, dtype=float)[~ok] if np.ndim(x) else x
                raise NodeError(f"density below floor at x={np.ravel(bad)[:3]} z={z}")
            return ratio
        return np.ma.masked_array(ratio, mask=~ok)

    def velocity(self, x, z, strict: bool = True):
        return self.light_speed_c * self.k_ratio(x, z, strict=strict)


def velocity(field: VelocityField, x, z):
    return field.velocity(x, z)


def velocity_change(state: BranchState, x, z, basis: ProjectionBasis, outcome: Outcome,
                    wavenumber_k: float, light_speed_c: float = SPEED_OF_LIGHT,
                    density_floor: float = 1e-12, strict: bool = True):
    """v_projected - v_unprojected at (x, z)."""
    projected, _ = project(state, basis, outcome)
    before = VelocityField(state, wavenumber_k, light_speed_c, density_floor)
    after = VelocityField(projected, wavenumber_k, light_speed_c, density_floor)
    return after.velocity(x, z, strict=strict) - before.velocity(x, z, strict=strict)
