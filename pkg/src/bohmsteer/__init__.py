"""Bohmian trajectories of a photon steered by a remote polarisation projection,
with an emulated weak-measurement detection and reconstruction chain."""

from .state import (SPEED_OF_LIGHT, BranchState, NodeError, Outcome, ProjectionBasis,
                    VelocityField, make_split_state, project, velocity_change)
from .trajectory import PlaneGrid, Trajectory, euler_step, trace, trace_steered
from .wavepacket import GaussianPacket, evaluate, gradient

__version__ = "0.1.0"
