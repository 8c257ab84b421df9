"""Experiment harness: ``op-poisson-lab <kind> --config <file> [--seed S] [--workers W] [--out DIR]``.

Every run writes its outputs, the effective ``config.yaml`` and a
``manifest.json`` of SHA-256 checksums into the output directory. Neither the
worker count nor timing enters any written file, so reruns with the same
config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import estimators as est
from . import fluctuations as fl
from .cluster import Cluster
from .density import build_grid, measure_density
from .homog import P_C
from .poisson import PoissonParams, critical_height, grow_poisson_clusters
from .shape import build_shape, check_envelope
from .svg import render_cluster, render_density
from ._validation import resolve_workers

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentReport", "KINDS", "run", "main"]

log = logging.getLogger("op_poisson_lab")

KINDS = ("simulate", "estimate-alpha", "estimate-theta", "estimate-sigma2", "tails", "shape",
         "envelope", "density", "fluct", "exponent", "render")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


@dataclass
class ExperimentConfig:
    kind: str
    beta: float = 1.0
    t: float | None = None
    t_list: list | None = None
    p: float | None = None
    p_grid: list | None = None
    K: int | None = None
    replicates: int | None = None
    a: float = 0.7
    eta: float = 0.25
    u_grid: list | None = None
    seed: int = 0
    out: str | None = None
    workers: int | None = None
    # tables feeding shape / density / fluctuations: CSV paths, or built on the fly
    alpha_table: str | None = None
    theta_table: str | None = None
    sigma2_table: str | None = None
    table_K: int | None = None
    table_replicates: int | None = None
    # render input and optional overlay
    input: str | None = None
    overlay: bool = False

    def __post_init__(self):
        self.validate()

    # -- validation ----------------------------------------------------------
    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        _pos("beta", self.beta)
        if self.t is not None:
            _pos("t", self.t, strict=False)
        if self.t_list is not None:
            if not isinstance(self.t_list, list) or len(self.t_list) < 2:
                raise ConfigError("t_list", "needs at least two values")
            for v in self.t_list:
                _pos("t_list", v)
        if self.p is not None:
            _prob("p", self.p)
        if self.p_grid is not None:
            if not isinstance(self.p_grid, list) or not self.p_grid:
                raise ConfigError("p_grid", "must be a non-empty list")
            for v in self.p_grid:
                _prob("p_grid", v)
        for name in ("K", "replicates", "table_K", "table_replicates", "workers"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 1):
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) \
                or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be an integer in [0, 2**64), got {self.seed!r}")
        if not isinstance(self.a, (int, float)) or not 0.5 < self.a < 1:
            raise ConfigError("a", f"must lie in (1/2, 1), got {self.a!r}")
        if not isinstance(self.eta, (int, float)) or not 0 < self.eta < 1:
            raise ConfigError("eta", f"must lie in (0, 1), got {self.eta!r}")
        if self.u_grid is not None:
            u = self.u_grid
            if not isinstance(u, list) or len(u) < 1 or any(
                    not isinstance(v, (int, float)) or not 0 < v < 1 for v in u) \
                    or any(b <= a for a, b in zip(u, u[1:])):
                raise ConfigError("u_grid", "must be an increasing list inside (0, 1)")
        need = {
            "simulate": ("t",), "envelope": ("t",), "density": ("t",), "fluct": ("t",),
            "exponent": ("t_list",), "tails": ("p",), "render": ("input",),
        }.get(self.kind, ())
        for name in need:
            if getattr(self, name) is None:
                raise ConfigError(name, f"required for kind {self.kind!r}")
        if self.kind in ("envelope", "density", "fluct") and self.t == 0:
            raise ConfigError("t", "must be positive for this kind")

    # -- (de)serialisation ---------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict):
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(unknown[0], "unknown key")
        if "kind" not in data:
            raise ConfigError("kind", "missing")
        return cls(**data)

    @classmethod
    def from_yaml(cls, text: str):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from None
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path, **overrides):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a mapping")
        data.update({k: v for k, v in overrides.items() if v is not None})
        base = Path(path).resolve().parent
        for key in ("alpha_table", "theta_table", "sigma2_table", "input"):
            if data.get(key) and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def content_hash(self) -> str:
        """Git-style blob hash of the config with run-local fields blanked."""
        body = dataclasses.replace(self, out=None, workers=None).to_yaml().encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def _pos(name, v, strict=True):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) \
            or v < 0 or (strict and v == 0):
        raise ConfigError(name, f"must be {'positive' if strict else 'non-negative'}, got {v!r}")


def _prob(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 <= v <= 1:
        raise ConfigError(name, f"must be a probability, got {v!r}")


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    config_hash: str
    out: Path
    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    wall_time: float = 0.0
    replicates_done: int = 0

    @property
    def throughput(self) -> float:
        return self.replicates_done / self.wall_time if self.wall_time > 0 else float("nan")


# -- output helpers ---------------------------------------------------------------

class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files = []

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(_plain(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv(self, name, header, rows):
        with open(self.path(name), "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- table plumbing ---------------------------------------------------------------

_TABLES = {
    "alpha": (est.SpeedTable, est.build_speed_table),
    "theta": (est.ThetaTable, est.build_theta_table),
    "sigma2": (est.VarianceTable, est.build_variance_table),
}


def _table(cfg: ExperimentConfig, which, w: _Writer, workers):
    cls, builder = _TABLES[which]
    path = getattr(cfg, f"{which}_table")
    if path:
        try:
            table = cls.from_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{which}_table", str(exc)) from None
    else:
        kw = {"seed": cfg.seed, "workers": workers}
        if cfg.table_K:
            kw["K"] = cfg.table_K
        if cfg.table_replicates:
            kw["replicates"] = cfg.table_replicates
        table = builder(cfg.p_grid or est.DEFAULT_P_GRID, **kw)
        table.to_csv(w.path(f"{which}_table.csv"))
    return table.pinned() if hasattr(table, "pinned") else table


def _p_grid(cfg):
    if cfg.p is not None:
        return [cfg.p]
    return list(cfg.p_grid or est.DEFAULT_P_GRID)


# -- kinds ------------------------------------------------------------------------

def _simulate(cfg, w, workers):
    params = PoissonParams(cfg.beta, cfg.t)
    R = cfg.replicates or 1
    clusters = grow_poisson_clusters(params, range(R), cfg.seed, workers=workers)
    rows = []
    for r, c in enumerate(clusters):
        c.to_csv(w.path(f"cluster_{r:04d}.csv"))
        rows.append((r, c.height, c.n_sites, int(c.censored)))
    render_cluster(clusters[0], w.path("cluster_0000.svg"), N=params.N)
    w.csv("clusters.csv", ["replicate", "height", "sites", "censored"], rows)
    w.json("simulate.json", {"beta": cfg.beta, "t": cfg.t, "N": params.N, "cap": params.cap})
    return R, {"N": params.N, "mean_height": float(np.mean([r[1] for r in rows]))}


def _estimate(which):
    fn = {"alpha": est.build_speed_table, "theta": est.build_theta_table,
          "sigma2": est.build_variance_table}[which]

    def job(cfg, w, workers):
        kw = {"seed": cfg.seed, "workers": workers}
        if cfg.K:
            kw["K"] = cfg.K
        if cfg.replicates:
            kw["replicates"] = cfg.replicates
        table = fn(_p_grid(cfg), **kw)
        table.to_csv(w.path(f"{which}.csv"))
        table.to_json(w.path(f"{which}.json"))
        return int(table.replicates.sum()), {"rows": len(table)}
    return job


def _tails(cfg, w, workers):
    kw = {"seed": cfg.seed, "workers": workers, "supercritical": cfg.p > P_C}
    if cfg.K:
        kw["K"] = cfg.K
    if cfg.replicates:
        kw["replicates"] = cfg.replicates
    rates = est.estimate_tail_rates(cfg.p, **kw)
    w.json("tails.json", rates.to_dict())
    return rates.replicates, {"gamma_par": rates.gamma_par, "gamma_perp": rates.gamma_perp}


def _shape(cfg, w, workers):
    curve = build_shape(cfg.beta, _table(cfg, "alpha", w, workers))
    curve.to_csv(w.path("shape.csv"))
    w.json("shape.json", {"beta": curve.beta, "y_c": curve.y_c, "g_max": curve.g_max})
    return 0, {"y_c": curve.y_c, "g_max": curve.g_max}


def _envelope(cfg, w, workers):
    curve = build_shape(cfg.beta, _table(cfg, "alpha", w, workers))
    params = PoissonParams(cfg.beta, cfg.t)
    R = cfg.replicates or 10
    clusters = grow_poisson_clusters(params, range(R), cfg.seed, workers=workers)
    reports = [check_envelope(c, curve, cfg.t, cfg.eta) for c in clusters]
    keys = ["height", "outer_violations", "outer_heights", "inner_violations", "inner_heights",
            "inner_applicable", "outer_fraction", "inner_fraction"]
    w.csv("envelope.csv", ["replicate"] + keys,
          ([r] + [_cell_val(rep.to_dict()[k]) for k in keys] for r, rep in enumerate(reports)))
    render_cluster(clusters[0], w.path("envelope_0000.svg"), N=params.N, curve=curve, t=cfg.t,
                   eta=cfg.eta)
    ok = [rep.outer_violations == 0 and rep.inner_applicable and rep.inner_fraction < 0.05
          for rep in reports]
    summary = {"N": params.N, "replicates": R, "pass_fraction": float(np.mean(ok))}
    w.json("envelope.json", summary)
    return R, summary


def _cell_val(v):
    return int(v) if isinstance(v, (bool, np.bool_)) else v


def _density(cfg, w, workers):
    curve = build_shape(cfg.beta, _table(cfg, "alpha", w, workers))
    theta = _table(cfg, "theta", w, workers)
    params = PoissonParams(cfg.beta, cfg.t)
    grid = build_grid(curve, cfg.t, cfg.a, cfg.eta)
    R = cfg.replicates or 10
    clusters = grow_poisson_clusters(params, range(R), cfg.seed, workers=workers)
    reports = [measure_density(c, grid, theta) for c in clusters]
    header = ["replicate", "i", "j", "x_center", "y_center", "D", "2D", "theta_ref", "deviation"]
    w.csv("density.csv", header, ([r, *row] for r, rep in enumerate(reports)
                                  for row in rep.to_rows()))
    render_density(reports[0], grid.side, w.path("density_0000.svg"))
    sups = [rep.sup_deviation for rep in reports]
    summary = {"N": params.N, "side": grid.side, "boxes": grid.n_lambda,
               "sup_deviation": sups, "median_sup_deviation": float(np.median(sups))}
    w.json("density.json", summary)
    return R, summary


def _fluct(cfg, w, workers):
    curve = build_shape(cfg.beta, _table(cfg, "alpha", w, workers))
    var = _table(cfg, "sigma2", w, workers)
    params = PoissonParams(cfg.beta, cfg.t)
    u = cfg.u_grid or list(fl.DEFAULT_U_GRID)
    R = cfg.replicates or 200
    ef = fl.sample_W(params, u, curve, var, R, cfg.seed, workers)
    w.csv("W.csv", ["replicate"] + [f"u={v!r}" for v in u],
          ([int(i), *row] for i, row in zip(ef.replicate_ids, ef.W)))
    per_u = []
    for j, uj in enumerate(ef.u_grid):
        col = ef.W[:, j]
        g = fl.test_gaussianity(col, ef.lattice_step) if col.size >= 100 else None
        se = col.std(ddof=1) / math.sqrt(col.size)
        per_u.append({"u": uj, "mean": col.mean(), "stderr": se, "var": col.var(ddof=1),
                      "V": ef.V[j], "var_ratio": col.var(ddof=1) / ef.V[j],
                      "ad_pvalue": g.pvalue if g else None,
                      "skewness": g.skewness if g else None,
                      "excess_kurtosis": g.excess_kurtosis if g else None})
    summary = {"N": params.N, "attempted": ef.attempted, "discarded": ef.discarded,
               "variance_clamped": ef.variance_clamped, "per_u": per_u}
    if ef.W.shape[1] >= 3 and ef.W.shape[0] >= 100:
        ind = fl.test_increment_independence(ef.W)
        summary["increment_corr"] = ind.corr
        summary["flagged_pairs"] = [list(p) for p in ind.flagged]
    w.json("fluct.json", summary)
    return ef.attempted, summary


def _exponent(cfg, w, workers):
    R = cfg.replicates or 200
    samples = []
    for t in cfg.t_list:
        h, _ = fl.sample_cluster_heights(PoissonParams(cfg.beta, float(t)), R, cfg.seed, workers)
        samples.append(h)
    fit = fl.fit_height_exponent(cfg.beta, cfg.t_list, samples=samples)
    w.csv("heights.csv", ["t", "replicate", "height"],
          ((float(t), r, int(v)) for t, s in zip(cfg.t_list, samples) for r, v in enumerate(s)))
    out = fit.to_dict()
    out["conjectured"] = est.conjectured_height_exponent()
    w.json("exponent.json", out)
    return R * len(cfg.t_list), {"b_hat": fit.b_hat, "stderr": fit.stderr}


def _render(cfg, w, workers):
    cluster = Cluster.from_csv(cfg.input)
    N = critical_height(cfg.beta, cfg.t) if cfg.t else None
    curve = None
    if cfg.overlay:
        if not cfg.t:
            raise ConfigError("overlay", "needs t")
        curve = build_shape(cfg.beta, _table(cfg, "alpha", w, workers))
    render_cluster(cluster, w.path(Path(cfg.input).stem + ".svg"), N=N, curve=curve,
                   t=cfg.t, eta=cfg.eta if curve is not None else None)
    return 1, {"sites": cluster.n_sites}


_JOBS = {
    "simulate": _simulate, "estimate-alpha": _estimate("alpha"),
    "estimate-theta": _estimate("theta"), "estimate-sigma2": _estimate("sigma2"),
    "tails": _tails, "shape": _shape, "envelope": _envelope, "density": _density,
    "fluct": _fluct, "exponent": _exponent, "render": _render,
}


def run(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one experiment and write its outputs, config and manifest."""
    out = Path(cfg.out or f"out-{cfg.kind}")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("out", str(exc)) from None
    try:
        workers = resolve_workers(cfg.workers)
    except (TypeError, ValueError) as exc:
        raise ConfigError("workers", str(exc)) from None
    w = _Writer(out)
    start = time.perf_counter()
    n_rep, summary = _JOBS[cfg.kind](cfg, w, workers)
    elapsed = time.perf_counter() - start

    clean = dataclasses.replace(cfg, out=None, workers=None)
    (out / "config.yaml").write_text(clean.to_yaml())
    files = {name: _sha256(out / name) for name in sorted(set(w.files) | {"config.yaml"})}
    chash = cfg.content_hash()
    manifest = {"kind": cfg.kind, "config_hash": chash, "files": files}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentReport(config=cfg, config_hash=chash, out=out, files=files,
                            summary=summary, wall_time=elapsed, replicates_done=n_rep)


def build_parser():
    ap = argparse.ArgumentParser(prog="op-poisson-lab",
                                 description="Poisson percolation experiments.")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", required=True, help="YAML experiment config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int, help="worker threads (default: $OP_POISSON_LAB_WORKERS "
                                                 "or 1)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; that code is reserved for runtime failures
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = ExperimentConfig.load(args.config, kind=args.kind, seed=args.seed,
                                    workers=args.workers, out=args.out)
        report = run(cfg)
    except ConfigError as exc:
        print(f"op-poisson-lab: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"op-poisson-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{cfg.kind}: {len(report.files)} files in {report.out} "
          f"({report.wall_time:.2f} s, {report.throughput:.1f} replicates/s)", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
