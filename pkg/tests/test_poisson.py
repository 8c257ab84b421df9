import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from op_poisson_lab import _kernels
from op_poisson_lab.density import in_region
from op_poisson_lab.homog import P_C
from op_poisson_lab.lattice import Site, stream_key
from op_poisson_lab.poisson import (PoissonParams, critical_height, default_cutoff,
                                    dual_membership_estimate, grow_poisson_cluster,
                                    grow_poisson_clusters, height_scale, level_probs, rho,
                                    sample_poisson_profiles)
from op_poisson_lab.shape import build_shape


def test_rho_limits_and_domain():
    assert rho(5.0, 0.0, 1.0) == 0.0
    assert rho(1e-9, 1.0, 1.0) == pytest.approx(1.0)
    assert rho(841.0, 30.0, 0.5) == pytest.approx(1 - math.exp(-30 / 29.0), rel=1e-12)
    assert abs(rho(841.0, 30.0, 0.5) - P_C) < 1e-3
    with pytest.raises(ValueError):
        rho(0.0, 1.0, 1.0)


def test_rho_monotone_on_grid():
    y = np.linspace(5.0, 100, 200)
    for t in (1.0, 10.0, 100.0):
        assert np.all(np.diff(rho(y, t, 0.7)) < 0)
    assert np.all(np.diff([rho(10.0, t, 1.3) for t in (1, 2, 4, 8)]) > 0)


def test_height_scale_examples():
    assert abs(height_scale(P_C, 30, 0.5) - 839) <= 3
    assert height_scale(1 - 1 / math.e, 17.0, 1.0) == pytest.approx(17.0)
    with pytest.raises(ValueError):
        height_scale(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        height_scale(1.0, 1.0, 1.0)
    assert critical_height(1.0, 0.0) == 0.0


@settings(max_examples=50)
@given(st.floats(0.01, 0.99), st.floats(0.2, 3.0), st.floats(0.1, 1000.0))
def test_height_scale_identities(p, beta, t):
    n = height_scale(p, t, beta)
    assert n / t ** (1 / beta) == pytest.approx((-math.log1p(-p)) ** (-1 / beta), rel=1e-10)
    assert rho(n, t, beta) == pytest.approx(p, rel=1e-9)


def test_zero_time_cluster_is_origin():
    c = grow_poisson_cluster(PoissonParams(1.0, 0.0))
    assert c.n_sites == 1 and c.height == 0


def test_cluster_structure():
    c = grow_poisson_cluster(PoissonParams(1.0, 50.0), seed=3)
    assert c.contains(0, 0)
    alive = c.counts > 0
    assert np.all(c.left[alive] <= c.right[alive])
    m, n = c.sites()
    assert np.all((m + n) % 2 == 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 60.0), st.floats(1.0, 3.0), st.integers(0, 500))
def test_monotone_in_t(t1, factor, rep):
    cap = 3 * int(critical_height(1.0, t1 * factor)) + 4
    a = grow_poisson_cluster(PoissonParams(1.0, t1, cap), seed=8, replicate=rep)
    b = grow_poisson_cluster(PoissonParams(1.0, t1 * factor, cap), seed=8, replicate=rep)
    assert a.issubset(b)


def test_sandwich_by_homogeneous_clusters():
    params = PoissonParams(1.0, 100.0)
    probs = level_probs(params, 200)
    for rep in range(30):
        c = grow_poisson_cluster(params, seed=2, replicate=rep)
        for lo, hi in ((5, 30), (40, 70), (80, 110)):
            # inside [lo, hi) the Poisson edges are open with probability between
            # p_minus = rho(hi - 1/2) and p_plus = rho(lo + 1/2); grow all three from
            # the Poisson level at lo
            if c.height < lo:
                continue
            p_minus, p_plus = probs[hi - 1], probs[lo]
            lvl = c.level(lo)
            key = stream_key(2, rep)
            # seed each strip with the Poisson level as a union of single-site runs
            sets = {}
            for name, pr in (("minus", p_minus), ("plus", p_plus)):
                occ = [set() for _ in range(hi - lo + 1)]
                for m in lvl:
                    _, cnt, _, _, ptr, rlo, rhi = _kernels.grow(
                        key, lo, int(m), int(m), np.full(hi - lo, pr), True, 0)
                    for s in range(hi - lo + 1):
                        for j in range(ptr[s], ptr[s + 1]):
                            occ[s].update(range(rlo[j], rhi[j] + 1, 2))
                sets[name] = occ
            for s in range(hi - lo + 1):
                k = lo + s
                here = set(c.level(k).tolist()) if k <= c.height else set()
                assert sets["minus"][s] <= here <= sets["plus"][s]


def test_default_cap_and_censoring():
    params = PoissonParams(1.0, 50.0)
    assert params.cap == math.ceil(2 * params.N)
    capped = grow_poisson_cluster(PoissonParams(1.0, 50.0, max_height_cap=10), seed=1)
    assert capped.censored and capped.height == 10


def test_height_excess_over_n_shrinks_with_t():
    # the excess height/N - 1 is a finite-size effect; at t = 200 it is still ~0.4
    medians = []
    for t in (50.0, 200.0, 800.0):
        params = PoissonParams(1.0, t)
        counts, _, _ = sample_poisson_profiles(params, np.arange(100), seed=6)
        heights = (counts > 0).sum(axis=1) - 1
        assert np.mean(counts[:, -1] > 0) <= 0.05
        medians.append(np.median(heights) / params.N - 1)
    assert medians[0] > medians[1] > medians[2] > 0


def test_solid_kernel():
    params = PoissonParams(1.0, 200.0)
    n = int(200 ** 0.5)
    full = 0
    for c in grow_poisson_clusters(params, range(200), seed=4):
        full += all(c.counts[k] == k + 1 for k in range(min(n, c.height) + 1)) and c.height >= n
    assert full / 200 >= 0.95


def test_reflection_symmetry():
    params = PoissonParams(1.0, 60.0)
    counts, left, right = sample_poisson_profiles(params, np.arange(500), seed=12)
    k = int(0.5 * params.N)
    alive = counts[:, k] > 0
    assert stats.ks_2samp(right[alive, k], -left[alive, k]).pvalue > 0.01


def test_dual_membership_trivial_cases():
    huge = PoissonParams(1.0, 1e6)
    assert dual_membership_estimate(Site(1, 1), huge)
    assert dual_membership_estimate(Site(0, 2), huge)
    zero = PoissonParams(1.0, 0.0)
    assert not dual_membership_estimate(Site(2, 4), zero, cutoff=3)
    assert dual_membership_estimate(Site(0, 0), zero, cutoff=3)
    assert not dual_membership_estimate(Site(2, 0), huge)


def test_dual_membership_exact_below_cutoff():
    params = PoissonParams(1.0, 30.0)
    for rep in range(20):
        c = grow_poisson_cluster(params, seed=7, replicate=rep)
        for m in range(-8, 9, 2):
            w = Site(m, 8)
            got = dual_membership_estimate(w, params, cutoff=50, seed=7, replicate=rep)
            assert got == c.contains(m, 8)


def test_default_cutoff():
    assert default_cutoff(1.0) == 1
    assert default_cutoff(400.0) == math.ceil(math.log(400.0) ** 2)


def test_worker_count_does_not_change_profiles():
    params = PoissonParams(0.5, 5.0)
    a = sample_poisson_profiles(params, np.arange(40), seed=1, workers=1)
    b = sample_poisson_profiles(params, np.arange(40), seed=1, workers=3)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_dual_membership_agrees_with_exact_membership(speed_table):
    t, eta = 400.0, 0.3
    params = PoissonParams(1.0, t)
    curve = build_shape(1.0, speed_table)
    rng = np.random.default_rng(0)
    agree = total = 0
    for rep in range(20):
        c = grow_poisson_cluster(params, seed=9, replicate=rep)
        pts = 0
        while pts < 50:
            y = int(rng.integers(0, int((1 - eta) * params.N) + 1))
            x = int(rng.integers(-c.right.max() - 2, c.right.max() + 3))
            if (x + y) % 2 or not in_region(curve, t, eta, x, y):
                continue
            pts += 1
            total += 1
            agree += dual_membership_estimate(Site(x, y), params, seed=9, replicate=rep) \
                == c.contains(x, y)
    assert agree / total >= 0.98
