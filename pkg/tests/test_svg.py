import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from op_poisson_lab.cluster import Cluster
from op_poisson_lab.density import build_grid, measure_density
from op_poisson_lab.homog import HomogParams, grow_cluster
from op_poisson_lab.poisson import PoissonParams, grow_poisson_cluster
from op_poisson_lab.shape import build_shape
from op_poisson_lab.svg import overlay_paths, render_cluster, render_density

NS = "{http://www.w3.org/2000/svg}"


def _parse(path):
    root = ET.parse(path).getroot()
    assert root.tag == NS + "svg"
    return root


def test_origin_only_cluster_file_renders(tmp_path):
    c = Cluster.from_kernel(np.array([1]), np.array([0]), np.array([0]),
                            np.array([0, 1]), np.array([0]), np.array([0]))
    c.to_csv(tmp_path / "c.csv")
    root = _parse(render_cluster(tmp_path / "c.csv", tmp_path / "c.svg"))
    cells = root.findall(f"{NS}g/{NS}rect")
    assert len(cells) == 1


def test_profile_only_cluster_renders_polygon(tmp_path):
    c = grow_poisson_cluster(PoissonParams(1.0, 20.0), seed=1, record=False)
    root = _parse(render_cluster(c, tmp_path / "p.svg", N=c.height))
    assert root.find(f"{NS}polygon") is not None


def test_one_rect_per_run(tmp_path):
    c = grow_cluster(HomogParams(0.75, 60), seed=3)
    root = _parse(render_cluster(c, tmp_path / "r.svg"))
    n_runs = sum(c.runs(k)[0].size for k in range(c.height + 1))
    assert len(root.findall(f"{NS}g/{NS}rect")) == n_runs


def test_large_cluster_renders_quickly(tmp_path):
    c = next(c for c in (grow_cluster(HomogParams(0.7, 1500), seed=1, replicate=r)
                         for r in range(50)) if c.n_sites > 100_000)
    start = time.perf_counter()
    render_cluster(c, tmp_path / "big.svg", N=1000)
    assert time.perf_counter() - start < 5.0


def test_overlays_are_mirror_images(linear_speed, tmp_path):
    curve = build_shape(1.0, linear_speed)
    paths = overlay_paths(curve, 50.0, 0.2, top=60)
    for s in (1, -1):
        assert np.allclose(paths[(s, 1)][:, 0], -paths[(s, -1)][:, 0])
        assert np.array_equal(paths[(s, 1)][:, 1], paths[(s, -1)][:, 1])
    assert np.all(paths[(1, 1)][:, 0] >= paths[(-1, 1)][:, 0])
    c = grow_poisson_cluster(PoissonParams(1.0, 50.0), seed=2)
    root = _parse(render_cluster(c, tmp_path / "o.svg", N=40, curve=curve, t=50.0, eta=0.2))
    colours = sorted(p.get("stroke") for p in root.findall(f"{NS}polyline"))
    assert colours == ["green", "green", "red", "red"]


def test_density_heat_map(linear_speed, flat_theta, tmp_path):
    curve = build_shape(0.5, linear_speed)
    grid = build_grid(curve, 30.0)
    rep = measure_density(grow_poisson_cluster(PoissonParams(0.5, 30.0), seed=1), grid,
                          flat_theta)
    root = _parse(render_density(rep, grid.side, tmp_path / "d.svg"))
    assert len(root.findall(f"{NS}rect")) == rep.box_count


@pytest.mark.parametrize("width", [200, 1200])
def test_pixel_width_sets_aspect(tmp_path, width):
    c = grow_cluster(HomogParams(1.0, 10))
    root = _parse(render_cluster(c, tmp_path / "w.svg", pixel_width=width))
    assert int(root.get("width")) == width
