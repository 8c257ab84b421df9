"""Minimal SVG figures: cluster silhouettes with envelope overlays and density heat maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cluster import Cluster
from .density import DensityReport
from .shape import ShapeCurve, envelope

__all__ = ["render_cluster", "render_density", "overlay_paths"]

_HEAD = ('<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.2f} {y0:.2f} {w:.2f} {h:.2f}" '
         'width="{pw}" height="{ph}">\n')


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".")


def overlay_paths(curve: ShapeCurve, t, eta, top, n_points=400):
    """Polyline points ``(x, -y)`` of ``+/-(1 +/- eta) Gamma_t`` up to height ``top``.

    Returns a dict keyed by ``(sign_of_eta, side)``; the two sides of each
    curve are mirror images.
    """
    ks = np.linspace(0.0, max(float(top), 1.0), n_points)
    gam = np.asarray(envelope(curve, t, ks), dtype=float)
    out = {}
    for s_eta in (1, -1):
        for side in (1, -1):
            x = side * (1 + s_eta * eta) * gam
            out[(s_eta, side)] = np.column_stack([x, -ks])
    return out


def render_cluster(cluster, out, N=None, curve: ShapeCurve | None = None, t=None, eta=None,
                   pixel_width=800):
    """Write an SVG of ``cluster`` (a :class:`Cluster` or a cluster CSV path).

    Each occupied run of sites is one filled rectangle one unit tall, so every
    site gets a unit-width mark. A blue rule marks height ``N`` and, when
    ``curve``, ``t`` and ``eta`` are given, the ``(1 +/- eta) Gamma_t`` curves
    are drawn on both sides.
    """
    if not isinstance(cluster, Cluster):
        cluster = Cluster.from_csv(cluster)
    n_levels = int(cluster.counts.size)
    alive = cluster.counts > 0
    span = 1.0
    if alive.any():
        span = max(span, float(np.max(np.abs(cluster.left[alive]))),
                   float(np.max(np.abs(cluster.right[alive]))))
    top = max(float(n_levels), float(N or 0), 1.0)
    overlays = {}
    if curve is not None and t is not None and eta is not None:
        overlays = overlay_paths(curve, t, eta, top)
        span = max(span, max(float(np.max(np.abs(p[:, 0]))) for p in overlays.values()))
    pad = 0.05 * max(span, top)
    x0, w = -span - pad, 2 * (span + pad)
    y0, h = -top - pad, top + 2 * pad
    pw = int(pixel_width)
    ph = max(1, int(round(pw * h / w)))

    parts = [_HEAD.format(x0=x0, y0=y0, w=w, h=h, pw=pw, ph=ph),
             f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" '
             'fill="white"/>\n']
    lw = _fmt(max(w / pw, 1e-3))
    # axes
    parts.append(f'<g stroke="gray" stroke-width="{lw}">'
                 f'<line x1="{_fmt(-span)}" y1="0" x2="{_fmt(span)}" y2="0"/>'
                 f'<line x1="0" y1="0" x2="0" y2="{_fmt(-top)}"/></g>\n')
    if cluster.has_sites and cluster.n_sites:
        parts.append('<g fill="black" shape-rendering="crispEdges">\n')
        for k in range(n_levels):
            lo, hi = cluster.runs(k)
            for a, b in zip(lo.tolist(), hi.tolist()):
                parts.append(f'<rect x="{a - 0.5}" y="{-k - 1}" width="{b - a + 1}" height="1"/>\n')
        parts.append("</g>\n")
    elif alive.any():
        ks = np.flatnonzero(alive)
        pts = " ".join(f"{cluster.left[k]},{-k}" for k in ks)
        pts += " " + " ".join(f"{cluster.right[k]},{-k}" for k in ks[::-1])
        parts.append(f'<polygon points="{pts}" fill="black"/>\n')
    if N is not None:
        parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(-N)}" x2="{_fmt(x0 + w)}" y2="{_fmt(-N)}" '
                     f'stroke="blue" stroke-width="{_fmt(2 * float(lw))}"/>\n')
    for (s_eta, _side), pts in sorted(overlays.items()):
        colour = "red" if s_eta > 0 else "green"
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" '
                     f'stroke-width="{_fmt(2 * float(lw))}"/>\n')
    parts.append("</svg>\n")
    Path(out).write_text("".join(parts))
    return Path(out)


def render_density(report: DensityReport, side, out, vmax=None, pixel_width=600):
    """Heat map of per-box ``|2D - theta|`` over the boxes in the report."""
    dev = report.deviation
    vmax = float(vmax if vmax is not None else (dev.max() if dev.size and dev.max() > 0 else 1.0))
    if dev.size:
        xs0, xs1 = report.i.min() * side, (report.i.max() + 1) * side
        ys1 = (report.j.max() + 1) * side
    else:
        xs0, xs1, ys1 = -1.0, 1.0, 1.0
    w, h = xs1 - xs0, ys1
    pw = int(pixel_width)
    ph = max(1, int(round(pw * h / w)))
    parts = [_HEAD.format(x0=xs0, y0=-ys1, w=w, h=h, pw=pw, ph=ph)]
    for i, j, d in zip(report.i.tolist(), report.j.tolist(), dev.tolist()):
        level = min(max(d / vmax, 0.0), 1.0)
        shade = int(round(255 * (1 - level)))
        parts.append(f'<rect x="{_fmt(i * side)}" y="{_fmt(-(j + 1) * side)}" '
                     f'width="{_fmt(side)}" height="{_fmt(side)}" '
                     f'fill="rgb(255,{shade},{shade})" stroke="gray" '
                     f'stroke-width="{_fmt(side / 50)}"><title>{d:.4f}</title></rect>\n')
    parts.append("</svg>\n")
    Path(out).write_text("".join(parts))
    return Path(out)
