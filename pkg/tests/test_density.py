import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from op_poisson_lab.cluster import Cluster
from op_poisson_lab.density import (EmptyRegionWarning, box_counts, build_grid, in_region,
                                    measure_density)
from op_poisson_lab.estimators import SpeedTable, ThetaTable
from op_poisson_lab.homog import P_C, HomogParams, grow_cluster
from op_poisson_lab.poisson import PoissonParams, grow_poisson_cluster
from op_poisson_lab.shape import build_shape


@pytest.fixture
def linear_curve(linear_speed):
    return build_shape(0.5, linear_speed)


def test_grid_validation(linear_curve):
    for kw in (dict(a=0.5), dict(a=1.0), dict(eta=0.0), dict(eta=1.0)):
        with pytest.raises(ValueError):
            build_grid(linear_curve, 30.0, **kw)
    with pytest.raises(ValueError):
        build_grid(linear_curve, 0.01)


def test_region_empties_as_eta_grows(linear_curve):
    with pytest.warns(EmptyRegionWarning):
        g = build_grid(linear_curve, 30.0, eta=0.99)
    assert g.n_lambda == 0


def test_lambda_boxes_lie_inside_region(linear_curve):
    t, eta = 30.0, 0.25
    g = build_grid(linear_curve, t, eta=eta)
    assert g.n_lambda > 0
    u = np.linspace(0, 1, 11)
    X, Y = np.meshgrid(u, u)
    for i, j in zip(g.i[g.in_lambda], g.j[g.in_lambda]):
        assert in_region(linear_curve, t, eta, (i + X) * g.side, (j + Y) * g.side).all()


def test_expected_boxes_at_t30(speed_table):
    g = build_grid(build_shape(0.5, speed_table), 30.0, a=0.7, eta=0.25)
    boxes = set(zip(g.j[g.in_lambda].tolist(), g.i[g.in_lambda].tolist()))
    assert {(2, -1), (2, 0)} <= boxes
    # boxes touching the base miss the apex of the region
    assert not any(j == 0 for j, _ in boxes)


def _brute_counts(cluster, grid):
    m, n = cluster.sites()
    s = grid.side
    return np.array([np.sum((m >= i * s) & (m < (i + 1) * s) & (n >= j * s) & (n < (j + 1) * s))
                     for i, j in zip(grid.i, grid.j)])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_box_counts_partition_sites(rep):
    t = 8.0
    params = PoissonParams(0.5, t)
    c = grow_poisson_cluster(params, seed=3, replicate=rep)
    p = np.linspace(P_C, 1.0, 5)
    curve = build_shape(0.5, SpeedTable(p, (p - P_C) / (1 - P_C), np.zeros(5),
                                        np.zeros(5, int), np.zeros(5, int)))
    g = build_grid(curve, t, a=0.6, eta=0.25)
    counts = box_counts(c, g)
    assert np.array_equal(counts, _brute_counts(c, g))
    m, n = c.sites()
    top = g.j.max() + 1
    covered = (n < top * g.side) & (m >= g.i.min() * g.side) & (m < (g.i.max() + 1) * g.side)
    assert counts.sum() == covered.sum()
    for k in range(0, counts.size, 7):
        s = g.side
        assert counts[k] == c.count_in_box(g.i[k] * s, (g.i[k] + 1) * s, g.j[k] * s,
                                           (g.j[k] + 1) * s)


def test_density_zero_above_extinction(linear_curve):
    g = build_grid(linear_curve, 30.0)
    origin = Cluster.from_kernel(np.array([1]), np.array([0]), np.array([0]),
                                 np.array([0, 1]), np.array([0]), np.array([0]))
    counts = box_counts(origin, g)
    assert counts.sum() == 1
    assert counts[(g.i == 0) & (g.j == 0)][0] == 1


def test_full_lattice_density_is_half(linear_curve):
    g = build_grid(linear_curve, 30.0)
    full = grow_cluster(HomogParams(1.0, int(g.N) + 1))
    rep = measure_density(full, g, _unit_theta())
    assert rep.box_count == g.n_lambda
    assert np.allclose(2 * rep.D, 1.0, atol=2 / g.side)


def _unit_theta():
    return ThetaTable([0.7, 1.0], [1.0, 1.0], [0, 0], [1, 1], [1, 1]).pinned()


def test_theta_reference_decreases_with_height(linear_curve, flat_theta, tmp_path):
    g = build_grid(linear_curve, 30.0)
    c = grow_poisson_cluster(PoissonParams(0.5, 30.0), seed=1)
    rep = measure_density(c, g, flat_theta)
    order = np.argsort(rep.y_center, kind="stable")
    assert np.all(np.diff(rep.theta_ref[order]) <= 0)
    assert rep.sup_deviation == pytest.approx(np.max(np.abs(2 * rep.D - rep.theta_ref)))
    rep.to_csv(tmp_path / "d.csv", replicate=4)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "replicate,i,j,x_center,y_center,D,2D,theta_ref,deviation"
    assert len(lines) == rep.box_count + 1 and lines[1].startswith("4,")
