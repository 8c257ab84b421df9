"""Acceptance criteria AC1-AC10, each printing one PASS/FAIL line.

Every Monte Carlo criterion uses the single seed below, fixed before any of
these runs were looked at.
"""

import json
import math
import time

import numpy as np
import yaml
from conftest import record_verdict

from op_poisson_lab.cli import main
from op_poisson_lab.density import build_grid, measure_density
from op_poisson_lab.estimators import (conjectured_height_exponent, estimate_alpha,
                                       estimate_sigma2, estimate_tail_rates, fit_log_linear_tail)
from op_poisson_lab.fluctuations import (fit_height_exponent, sample_W, test_gaussianity,
                                         test_increment_independence)
from op_poisson_lab.homog import (P_C, HomogParams, exact_enumeration, grow_cluster,
                                  sample_dual_depths, sample_survival)
from op_poisson_lab.lattice import Site
from op_poisson_lab.poisson import PoissonParams, grow_poisson_cluster, height_scale
from op_poisson_lab.shape import build_shape, check_envelope

SEED = 2026


def _verdict(n, ok, detail, elapsed=None):
    tail = f" [{elapsed:.1f} s]" if elapsed is not None else ""
    record_verdict(f"AC{n} {'PASS' if ok else 'FAIL'}: {detail}{tail}")
    return ok


def test_ac1_exact_oracle():
    start = time.perf_counter()
    worst = 0.0
    for p in (0.2, 0.5, 0.8):
        law = exact_enumeration(p, 3)
        batch = sample_survival(p, 3, 100_000, seed=SEED)
        n = batch.tau.size
        cells = [(law.tau[3], np.mean(batch.tau >= 3))]
        r = batch.r_K
        for x, prob in law.r_K.items():
            hit = np.isnan(r) if x is None else (r == x)
            cells.append((prob, hit.mean()))
        for prob, est in cells:
            sd = math.sqrt(prob * (1 - prob) / n)
            worst = max(worst, abs(est - prob) / sd if sd > 0 else (0.0 if est == prob else 1e9))
    elapsed = time.perf_counter() - start
    ok = worst < 3 and elapsed < 60
    assert _verdict(1, ok, f"max |MC - exact| = {worst:.2f} sigma over P(tau>=3) and law of r_3",
                    elapsed)


def test_ac2_known_constants():
    start = time.perf_counter()
    a1, s1 = estimate_alpha(1.0)
    v1, _ = estimate_sigma2(1.0)
    a_c, se = estimate_alpha(P_C, K=2000, replicates=200, seed=SEED)
    elapsed = time.perf_counter() - start
    ok = a1 == 1.0 and v1 == 0.0 and abs(a_c) <= 0.05 and elapsed < 600
    assert _verdict(2, ok, f"alpha(1) = {a1}, sigma2(1) = {v1}, alpha(p_c) = {a_c:.4f} "
                           f"+/- {se:.4f}", elapsed)


def test_ac3_height_scale():
    N = height_scale(P_C, 30, 0.5)
    assert _verdict(3, abs(N - 839) <= 3, f"height_scale(p_c, 30) at beta = 1/2 = {N:.3f}")


def test_ac4_monotone_coupling():
    start = time.perf_counter()
    bad = 0
    for r in range(1000):
        lo = grow_cluster(HomogParams(0.6, 200), seed=SEED, replicate=r)
        hi = grow_cluster(HomogParams(0.8, 200), seed=SEED, replicate=r)
        bad += not lo.issubset(hi)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 60
    assert _verdict(4, ok, f"{bad} violations of G_0.6 within G_0.8 in 1000 pairs", elapsed)


def test_ac5_subcritical_tails():
    start = time.perf_counter()
    rates = estimate_tail_rates(0.55, K=400, replicates=100_000, seed=SEED)
    depth = sample_dual_depths(Site(0, 60), 0.8, 60, 100_000, seed=SEED)
    k = np.arange(1, 60)
    counts = np.array([(depth[depth < 60] >= kk).sum() for kk in k])
    dual = fit_log_linear_tail(k, counts / depth.size, counts)
    elapsed = time.perf_counter() - start
    ok = rates.fit_par.r2 > 0.98 and dual.slope < 0 and dual.r2 > 0.95 and elapsed < 600
    assert _verdict(5, ok, f"R2 tau tail at 0.55 = {rates.fit_par.r2:.4f}, "
                           f"R2 dual tail at 0.8 = {dual.r2:.4f}", elapsed)


def test_ac6_envelope(speed_table):
    start = time.perf_counter()
    t, eta = 400.0, 0.15
    curve = build_shape(1.0, speed_table)
    params = PoissonParams(1.0, t)
    reports, r = [], 0
    while len(reports) < 50:
        c = grow_poisson_cluster(params, seed=SEED, replicate=r)
        r += 1
        if c.height >= (1 - eta) * params.N:
            reports.append(check_envelope(c, curve, t, eta))
    good = [rep.outer_violations == 0 and rep.inner_fraction < 0.05 for rep in reports]
    elapsed = time.perf_counter() - start
    rate = float(np.mean(good))
    ok = rate >= 0.9 and elapsed < 1800
    max_inner = max(rep.inner_fraction for rep in reports)
    assert _verdict(6, ok, f"{sum(good)}/50 surviving replicates inside the envelope "
                           f"({r} grown, max inner fraction {max_inner:.3f})", elapsed)


def test_ac7_density(speed_table, theta_table):
    start = time.perf_counter()
    curve = build_shape(0.5, speed_table)
    medians, rates = {}, {}
    for t in (30.0, 60.0):
        grid = build_grid(curve, t, a=0.7, eta=0.25)
        params = PoissonParams(0.5, t)
        sups = np.array([measure_density(grow_poisson_cluster(params, seed=SEED, replicate=r),
                                         grid, theta_table).sup_deviation for r in range(50)])
        medians[t] = float(np.median(sups))
        rates[t] = float(np.mean(sups < 0.1))
    elapsed = time.perf_counter() - start
    ok = rates[30.0] >= 0.8 and medians[60.0] < medians[30.0] and elapsed < 1800
    assert _verdict(7, ok, f"{rates[30.0]:.0%} of replicates with sup < 0.1 at t = 30; "
                           f"median sup {medians[30.0]:.4f} (t = 30) vs "
                           f"{medians[60.0]:.4f} (t = 60)", elapsed)


def _calibration():
    rng = np.random.default_rng(SEED)
    size = np.mean([test_gaussianity(rng.normal(size=200)).rejected(0.05) for _ in range(200)])
    power = np.mean([test_gaussianity(rng.exponential(size=500)).rejected(0.01)
                     for _ in range(100)])
    indep = np.mean([not test_increment_independence(
        np.cumsum(rng.normal(size=(200, 3)), axis=1)).any_flagged for _ in range(100)])
    z = rng.normal(size=(200, 1))
    full = test_increment_independence(np.cumsum(np.hstack([z, z, z]), axis=1)).any_flagged
    return size, power, indep, full


def test_ac8_clt(speed_table, variance_table):
    start = time.perf_counter()
    curve = build_shape(1.0, speed_table)
    ef = sample_W(PoissonParams(1.0, 400.0), [0.25, 0.5, 0.75], curve, variance_table,
                  replicates=200, seed=SEED)
    w = ef.column(0.5)
    z_mean = w.mean() / (w.std(ddof=1) / math.sqrt(w.size))
    ratio = ef.variance_ratio(0.5)
    gauss = test_gaussianity(w, ef.lattice_step)
    indep = test_increment_independence(ef.W)
    size, power, calib_indep, full = _calibration()
    elapsed = time.perf_counter() - start
    checks = {
        "mean": abs(z_mean) < 3,
        "variance": 0.7 <= ratio <= 1.4,
        "normality": not gauss.rejected(0.01),
        "increments": not indep.any_flagged,
        "calibration": 0.03 <= size <= 0.07 and power >= 0.99 and calib_indep >= 0.95 and full,
    }
    ok = all(checks.values()) and elapsed < 3600
    failed = [k for k, v in checks.items() if not v]
    assert _verdict(8, ok, f"mean/stderr = {z_mean:.2f}, Var/V = {ratio:.3f}, AD p = "
                           f"{gauss.pvalue:.3f}, flagged pairs {indep.flagged}, size "
                           f"{size:.3f}, power {power:.2f}"
                           + (f"; failed: {', '.join(failed)}" if failed else ""), elapsed)


def test_ac9_exponent():
    start = time.perf_counter()
    arith = round(conjectured_height_exponent(), 3)
    fit = fit_height_exponent(0.5, [10.0, 20.0, 40.0, 80.0], replicates=200, seed=SEED)
    lo, hi = fit.ci()
    elapsed = time.perf_counter() - start
    ok = arith == 0.634 and 0.45 < fit.b_hat < 0.8 and elapsed < 7200
    assert _verdict(9, ok, f"nu/(1+nu) = {arith}; b_hat = {fit.b_hat:.3f} "
                           f"(95% CI [{lo:.3f}, {hi:.3f}], {fit.censored} censored)", elapsed)


_AC10_JOBS = {
    "simulate": {"t": 30.0, "beta": 0.5, "replicates": 4},
    "estimate-alpha": {"p_grid": [0.8, 1.0], "K": 300, "replicates": 16},
    "estimate-theta": {"p_grid": [0.8, 1.0], "K": 200, "replicates": 200},
    "estimate-sigma2": {"p_grid": [0.8, 1.0], "K": 200, "replicates": 40},
    "tails": {"p": 0.5, "K": 200, "replicates": 5000},
    "shape": {"beta": 0.5},
    "envelope": {"t": 100.0, "eta": 0.15, "replicates": 8},
    "density": {"t": 30.0, "beta": 0.5, "replicates": 4},
    "fluct": {"t": 100.0, "replicates": 100, "u_grid": [0.25, 0.5, 0.75]},
    "exponent": {"t_list": [5.0, 10.0, 20.0], "beta": 0.5, "replicates": 30},
}


def test_ac10_determinism(tmp_path, speed_table, theta_table, variance_table):
    start = time.perf_counter()
    speed_table.to_csv(tmp_path / "alpha.csv")
    theta_table.to_csv(tmp_path / "theta.csv")
    variance_table.to_csv(tmp_path / "sigma2.csv")
    tables = {"alpha_table": "alpha.csv", "theta_table": "theta.csv",
              "sigma2_table": "sigma2.csv"}
    mismatched, compared = [], 0
    for kind, extra in _AC10_JOBS.items():
        cfg = tmp_path / f"{kind}.yaml"
        cfg.write_text(yaml.safe_dump({"kind": kind, "seed": SEED, **extra, **tables}))
        outs = []
        for workers in (1, 8):
            out = tmp_path / f"{kind}-w{workers}"
            code = main([kind, "--config", str(cfg), "--out", str(out), "--workers",
                         str(workers)])
            assert code == 0, kind
            outs.append(out)
        files = json.loads((outs[0] / "manifest.json").read_text())["files"]
        for name in files:
            if name.endswith((".csv", ".json")):
                compared += 1
                if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
                    mismatched.append(f"{kind}/{name}")
        if (outs[0] / "manifest.json").read_bytes() != (outs[1] / "manifest.json").read_bytes():
            mismatched.append(f"{kind}/manifest.json")
    elapsed = time.perf_counter() - start
    ok = not mismatched
    assert _verdict(10, ok, f"{compared} CSV/JSON outputs over {len(_AC10_JOBS)} kinds "
                            f"byte-identical at 1 and 8 workers"
                            + (f"; differing: {mismatched}" if mismatched else ""), elapsed)
