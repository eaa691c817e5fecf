"""SVG figures: streamline portraits of single solutions and branch diagnostics."""

from __future__ import annotations

import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import VStateError  # noqa: E402
from .field import StreamField, contour_extract, find_critical_points, sample_field, unfold  # noqa: E402

logger = logging.getLogger(__name__)

PATCH_COLOR = "#c8d3e6"
LINE_COLOR = "#1f3b73"


def _levels(grid, saddle_value=None, n=14):
    outside = grid.psi[~grid.inside]
    lo, hi = float(np.min(outside)), float(np.max(grid.psi))
    levels = list(np.linspace(lo, hi, n + 2)[1:-1])
    levels.append(0.0)
    if saddle_value is not None:
        levels.append(saddle_value)
    return sorted(set(levels))


def streamline_figure(fld: StreamField, path, n_r: int = 80, n_theta: int = 40, title: str | None = None):
    """Level curves of Psi, the patch, the dashed Psi_r = 0 curve and the critical points."""
    m = fld.m
    crit = []
    try:
        crit = find_critical_points(fld, strict=False)
    except VStateError as exc:
        logger.warning("critical points not found: %s", exc)
    saddle_value = None
    for c in crit:
        if c.kind.value == "saddle":
            saddle_value = fld.psi_point(c.z)
    r_out = 1.6 * fld.max_radius
    grid = sample_field(fld, n_r=n_r, n_theta=n_theta, r_max=r_out)

    fig, ax = plt.subplots(figsize=(6, 6))
    bnd = np.append(fld.trace.phi, fld.trace.phi[0])
    ax.fill(bnd.real, bnd.imag, color=PATCH_COLOR, zorder=0)
    ax.plot(bnd.real, bnd.imag, color=LINE_COLOR, lw=1.2)

    for line in contour_extract(grid, _levels(grid, saddle_value)):
        for piece in unfold(line.points, m):
            ax.plot(piece.real, piece.imag, color="0.35", lw=0.6)

    try:
        th = np.linspace(0.0, np.pi / m, 60)
        rc = fld.rc_curve(th)
        for piece in unfold(rc * np.exp(1j * th), m):
            ax.plot(piece.real, piece.imag, "k--", lw=0.9)
    except VStateError as exc:
        logger.warning("Psi_r = 0 curve not drawn: %s", exc)

    for c in crit:
        marker = "x" if c.kind.value == "saddle" else "o"
        for piece in unfold(np.array([c.z]), m):
            ax.plot(piece.real, piece.imag, marker, color="crimson", ms=6, mfc="none")

    ax.set_aspect("equal")
    ax.set_xlim(-r_out, r_out)
    ax.set_ylim(-r_out, r_out)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title, fontsize=10)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return grid


def branch_figure(records, path):
    """max|phi|, min Psi_r on the boundary and saddle distance against Omega."""
    om = np.array([r.omega for r in records])
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    axes[0].plot(om, [r.metrics.maxPhi for r in records], ".-", color=LINE_COLOR)
    axes[0].set_ylabel(r"$\max|\phi|$")
    axes[1].plot(om, [r.metrics.minPsiR for r in records], ".-", color=LINE_COLOR)
    axes[1].set_ylabel(r"$\min_{\partial D}\Psi_r$")
    sad = [(r.omega, r.saddle.distance_to_boundary) for r in records if r.saddle is not None]
    if sad:
        s = np.array(sad)
        axes[2].plot(s[:, 0], s[:, 1], ".-", color=LINE_COLOR)
    grid = np.linspace(om.min(), om.max(), 100)
    axes[2].plot(grid, 1 / np.sqrt(2 * grid) - 1, "k--", lw=0.8)
    axes[2].set_ylabel("saddle distance")
    for ax in axes:
        ax.set_xlabel(r"$\Omega$")
        ax.invert_xaxis()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
