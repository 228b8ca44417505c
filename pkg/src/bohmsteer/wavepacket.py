"""Paraxial propagation of one-dimensional Gaussian wavepackets.

Packets are normalised so that the integral of |psi|^2 over x equals
|amplitude_scale|^2 at every plane. The longitudinal coordinate z plays
the role of time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianPacket:
    """A transverse Gaussian mode with its waist at ``waist_z``.

    ``waist_w0`` is the 1/e amplitude half-width at the waist.
    """

    center_x: float
    waist_w0: float
    waist_z: float
    wavenumber_k: float
    amplitude_scale: complex = 1.0

    def __post_init__(self):
        if not self.waist_w0 > 0:
            raise ValueError(f"waist_w0 must be positive, got {self.waist_w0}")
        if not self.wavenumber_k > 0:
            raise ValueError(f"wavenumber_k must be positive, got {self.wavenumber_k}")

    @property
    def rayleigh_range(self) -> float:
        return 0.5 * self.wavenumber_k * self.waist_w0**2

    def width(self, z):
        dz = np.asarray(z, dtype=float) - self.waist_z
        return self.waist_w0 * np.sqrt(1.0 + (dz / self.rayleigh_range) ** 2)

    def inverse_curvature(self, z):
        """1/R(z); zero at the waist plane."""
        dz = np.asarray(z, dtype=float) - self.waist_z
        return dz / (dz**2 + self.rayleigh_range**2)

    def gouy_phase(self, z):
        dz = np.asarray(z, dtype=float) - self.waist_z
        return np.arctan(dz / self.rayleigh_range)

    def peak_density(self, z):
        """max_x |psi(x, z)|^2."""
        return abs(self.amplitude_scale) ** 2 * np.sqrt(2.0 / np.pi) / self.width(z)

    def shifted(self, dx: float) -> "GaussianPacket":
        return GaussianPacket(self.center_x + dx, self.waist_w0, self.waist_z,
                              self.wavenumber_k, self.amplitude_scale)

    def scaled(self, factor: complex) -> "GaussianPacket":
        return GaussianPacket(self.center_x, self.waist_w0, self.waist_z,
                              self.wavenumber_k, self.amplitude_scale * factor)


def evaluate(packet: GaussianPacket, x, z):
    """Complex amplitude psi(x, z); broadcasts over ``x`` and ``z``."""
    x = np.asarray(x, dtype=float)
    w = packet.width(z)
    u = x - packet.center_x
    exponent = (-(u**2) / w**2
                + 0.5j * packet.wavenumber_k * u**2 * packet.inverse_curvature(z)
                - 0.5j * packet.gouy_phase(z))
    norm = (2.0 / (np.pi * w**2)) ** 0.25
    return packet.amplitude_scale * norm * np.exp(exponent)


def gradient(packet: GaussianPacket, x, z):
    """Analytic d(psi)/dx."""
    x = np.asarray(x, dtype=float)
    u = x - packet.center_x
    w = packet.width(z)
    log_derivative = -2.0 * u / w**2 + 1j * packet.wavenumber_k * u * packet.inverse_curvature(z)
    return evaluate(packet, x, z) * log_derivative


def _complex_beam_parameter(packet: GaussianPacket, z):
    # psi ~ exp(-alpha * u^2)
    return 1.0 / packet.width(z) ** 2 - 0.5j * packet.wavenumber_k * packet.inverse_curvature(z)


def overlap(p: GaussianPacket, q: GaussianPacket, z: float | None = None) -> complex:
    """Closed-form inner product <p|q> = integral of conj(p) q over x.

    Free propagation is unitary, so the result does not depend on the plane;
    ``z`` only selects where the Gaussian integral is carried out. Both
    packets must share a wavenumber.
    """
    if not np.isclose(p.wavenumber_k, q.wavenumber_k, rtol=1e-14, atol=0.0):
        raise ValueError("overlap requires packets with the same wavenumber")
    if z is None:
        z = p.waist_z
    a1 = np.conj(_complex_beam_parameter(p, z))
    a2 = _complex_beam_parameter(q, z)
    n1 = np.conj(p.amplitude_scale * (2.0 / (np.pi * p.width(z) ** 2)) ** 0.25
                 * np.exp(-0.5j * p.gouy_phase(z)))
    n2 = q.amplitude_scale * (2.0 / (np.pi * q.width(z) ** 2)) ** 0.25 * np.exp(-0.5j * q.gouy_phase(z))
    s = a1 + a2
    sep = p.center_x - q.center_x
    return complex(n1 * n2 * np.sqrt(np.pi / s) * np.exp(-a1 * a2 * sep**2 / s))
