import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmsteer.state import (SPEED_OF_LIGHT, Branch, BranchState, Outcome, ProjectionBasis,
                             VelocityField, project)
from bohmsteer.trajectory import (PlaneGrid, euler_step, seed_positions, trace, trace_many,
                                  trace_steered, trace_steered_many, velocity_change_map)
from bohmsteer.wavepacket import GaussianPacket

from conftest import K, W0

C = SPEED_OF_LIGHT


def reference_step(x, z, z_next, v, c=C):
    # the update rule typed in as written, scalar math only
    return x + (z_next - z) * v / math.sqrt(c * c - v * v)


def test_euler_step_examples():
    assert euler_step(1e-3, 2.0, 2.5, 0.0) == 1e-3
    assert euler_step(0.0, 0.0, 1.0, C / np.sqrt(2)) == pytest.approx(1.0, rel=1e-15)
    dz = (4.5 - 1.492) / 44
    assert dz == pytest.approx(0.0684, abs=1e-4)
    expect = 0.0684 * 1e-3 / math.sqrt(1 - 1e-6)
    assert expect == pytest.approx(6.84e-5, rel=1e-6)
    assert euler_step(0.0, 0.0, 0.0684, 1e-3 * C) == pytest.approx(expect, abs=1e-12)


@settings(max_examples=200)
@given(x=st.floats(-5e-3, 5e-3), z=st.floats(0, 5), dz=st.floats(1e-3, 1.0),
       beta=st.floats(-0.99, 0.99))
def test_euler_step_matches_reference(x, z, dz, beta):
    v = beta * C
    assert euler_step(x, z, z + dz, v) == reference_step(x, z, z + dz, v)


@pytest.mark.parametrize("v,zn", [(C, 1.0), (-1.5 * C, 1.0), (0.0, 0.0), (0.0, -1.0)])
def test_euler_step_rejections(v, zn):
    with pytest.raises(ValueError):
        euler_step(0.0, 0.0, zn, v)


def test_plane_grid_validation():
    g = PlaneGrid.uniform(1.492, 4.5, 45)
    assert g.z.size == 45 and g.z[0] == 1.492 and g.z[-1] == 4.5
    assert g.refined().z.size == 89
    for bad in ([1.0], [1.0, 1.0], [2.0, 1.0], [1.0, float("nan")]):
        with pytest.raises(ValueError):
            PlaneGrid(tuple(bad))
    with pytest.raises(ValueError):
        g.index_of(2.245)
    assert g.index_of(g.z[7]) == 7


def single_field(center=2e-4):
    p = GaussianPacket(center, W0, 0.0, K)
    return VelocityField(BranchState((Branch(1.0, ((1.0, p),)),)), K)


def test_trace_center_of_single_packet_is_straight(config):
    t = trace(2e-4, config.grid(), single_field(2e-4))
    assert t.complete
    assert np.all(t.x == 2e-4)
    assert np.all(np.diff(t.z) > 0)


def test_trace_midline_is_straight(config, split):
    t = trace(0.0, config.grid(), VelocityField(split, K))
    assert np.all(t.x == 0.0)


def test_unprojected_trajectories_do_not_cross(config, split):
    seeds = config.seed_positions()
    trajs = trace_many(seeds, config.grid(), VelocityField(split, K))
    xs = np.array([t.x for t in trajs])
    assert all(t.complete for t in trajs)
    assert np.all(np.diff(xs, axis=0) > 1e-12)


def test_single_packet_trajectories_are_rays(config):
    # a Gaussian packet's Bohmian paths scale with the width
    f = single_field(0.0)
    g = config.grid().refined().refined().refined()
    t = trace(1e-4, g, f)
    p = f.state.branches[0].packets[0][1]
    expect = 1e-4 * p.width(g.z[-1]) / p.width(g.z[0])
    assert t.x[-1] == pytest.approx(expect, rel=2e-3)


def test_steer_at_last_plane_equals_unsteered(config, split):
    g = config.grid()
    for x0 in config.seed_positions()[::5]:
        a = trace(x0, g, VelocityField(split, K))
        b = trace_steered(x0, g, g.z[-1], ProjectionBasis.from_degrees(18.5), Outcome.THETA, split, K)
        assert np.array_equal(a.x, b.x)
        assert b.branch_z == g.z[-1]


def test_steer_at_first_plane_follows_projected_field(config, split):
    g = config.grid()
    basis = ProjectionBasis.from_degrees(31.4)
    proj, _ = project(split, basis, Outcome.THETA)
    seeds = config.seed_positions()
    a = trace_many(seeds, g, VelocityField(proj, K))
    b = [trace_steered(x0, g, g.z[0], basis, Outcome.THETA, split, K) for x0 in seeds]
    for ta, tb in zip(a, b):
        assert np.array_equal(ta.x, tb.x)
        assert tb.outcome_label == (pytest.approx(31.4), Outcome.THETA)


def test_steer_rejects_off_grid_switch(config, split):
    with pytest.raises(ValueError):
        trace_steered(0.0, config.grid(), 2.245, ProjectionBasis(0.3), Outcome.THETA, split, K)


def test_steering_crosses_midline(config, split):
    g = config.grid()
    zs = g.nearest(2.245)
    seeds = config.seed_positions()
    basis = ProjectionBasis.from_degrees(18.5)
    proj, _ = project(split, basis, Outcome.THETA)
    trajs = trace_steered_many(seeds[seeds < 0], g, zs, VelocityField(split, K),
                               VelocityField(proj, K))
    assert any(np.any(t.x[t.z >= zs] > 0) for t in trajs)


def test_node_aborts_with_partial_path(config, split):
    proj, _ = project(split, ProjectionBasis.from_degrees(45.0), Outcome.THETA)
    t = trace(0.0, config.grid(), VelocityField(proj, K))
    assert not t.complete
    assert t.x.size == 1 and "node" in t.error


def test_velocity_change_map_antisymmetric_at_45(config, split):
    x = config.map_x()
    dv = velocity_change_map(split, x, config.grid().z, ProjectionBasis.from_degrees(45.0),
                             Outcome.THETA, K)
    assert dv.shape == (45, 641)
    m = np.ma.getmaskarray(dv)
    assert np.array_equal(m, m[:, ::-1])
    assert np.ma.max(np.abs(dv + dv[:, ::-1])) < 1e-10


def test_velocity_change_map_masks_only_nodes(config, split):
    x = config.map_x()
    z = config.grid().z
    basis = ProjectionBasis.from_degrees(31.4)
    dv = velocity_change_map(split, x, z, basis, Outcome.THETA, K)
    proj, _ = project(split, basis, Outcome.THETA)
    for j, zj in enumerate(z):
        below = proj.density(x, zj) <= 1e-12 * proj.peak_density_bound(zj)
        assert np.array_equal(np.ma.getmaskarray(dv[j]), below)
    assert np.all(np.isfinite(dv.compressed()))


def test_seed_positions_layout():
    s = seed_positions([-1.5e-3, 1.5e-3], 1e-3, 16)
    assert s.size == 32
    assert s[0] == pytest.approx(-3.5e-3) and s[15] == pytest.approx(0.5e-3)
