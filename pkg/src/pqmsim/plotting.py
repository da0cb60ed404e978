"""Figures written next to the CSV/report outputs. Headless (Agg) only."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .hysteresis import RELATIONS, extract_steady_cycle  # noqa: E402

RELATION_LABELS = {
    "intra_1": r"$\langle N_{in}^{(1)}\rangle$ vs $\langle N_{out}^{(1)}\rangle$",
    "intra_2": r"$\langle N_{in}^{(2)}\rangle$ vs $\langle N_{out}^{(2)}\rangle$",
    "inter_21": r"$\langle N_{in}^{(2)}\rangle$ vs $\langle N_{out}^{(1)}\rangle$",
    "inter_12": r"$\langle N_{in}^{(1)}\rangle$ vs $\langle N_{out}^{(2)}\rangle$",
}

_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_hysteresis(series, relations, period_bins, path, m=None, title=None):
    """One panel per relation, steady cycle over the full trajectory in grey."""
    fig, axes = plt.subplots(1, len(relations), figsize=(3.2 * len(relations), 3.2), squeeze=False)
    for ax, rel in zip(axes[0], relations):
        i, j = RELATIONS[rel]
        ax.plot(series.n_in[:, i], series.n_out[:, j], color="0.8", lw=0.6)
        curve = extract_steady_cycle(series, rel, period_bins, m)
        closed = np.vstack([curve.points, curve.points[:1]])
        ax.plot(closed[:, 0], closed[:, 1], color="#0072B2", lw=1.4, marker=".", ms=2)
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.set_aspect("equal")
        ax.set_title(RELATION_LABELS.get(rel, rel), fontsize=9)
        ax.set_xlabel(r"$\langle N_{in}\rangle$")
    axes[0][0].set_ylabel(r"$\langle N_{out}\rangle$")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    return _save(fig, path)


def plot_curve(points, path, diagnostics=None, title=None):
    fig, ax = plt.subplots(figsize=(4, 4))
    closed = np.vstack([points, points[:1]])
    ax.plot(closed[:, 0], closed[:, 1], color="#0072B2", lw=1.2)
    if diagnostics is not None:
        for x, y in diagnostics.intersection_points:
            ax.plot(x, y, "x", color="#D55E00", ms=8)
        ax.text(0.02, 0.98, f"F = {diagnostics.form_factor:.3f}\n"
                f"self-intersecting: {diagnostics.self_intersecting}\n"
                f"pinched: {diagnostics.pinched_at_origin}",
                transform=ax.transAxes, va="top", fontsize=8)
    ax.set_xlabel(r"$\langle N_{in}\rangle$")
    ax.set_ylabel(r"$\langle N_{out}\rangle$")
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(result, path):
    """2x2 (coupled) or 1x1 (single) colour maps, phase on x, memory ratio on y."""
    rels = result.relations
    if len(rels) == 4:
        layout = [["intra_1", "inter_21"], ["inter_12", "intra_2"]]
    else:
        layout = [list(rels)]
    nr, nc = len(layout), len(layout[0])
    fig, axes = plt.subplots(nr, nc, figsize=(4.2 * nc, 3.6 * nr), squeeze=False)
    binary = result.metric == "self_intersection"
    extent = [result.phis[0], result.phis[-1], result.t_ratios[0], result.t_ratios[-1]]
    for r, row in enumerate(layout):
        for c, rel in enumerate(row):
            ax = axes[r][c]
            im = ax.imshow(result.values[rel], origin="lower", aspect="auto", extent=extent,
                           cmap="cividis" if binary else "viridis",
                           vmin=0.0, vmax=1.0)
            ax.set_title(RELATION_LABELS.get(rel, rel), fontsize=9)
            ax.set_xlabel(r"$\Phi$ (rad)")
            ax.set_ylabel(r"$T/T_{osc}$")
            fig.colorbar(im, ax=ax)
    fig.suptitle("self-intersection" if binary else "form factor", fontsize=10)
    fig.tight_layout()
    return _save(fig, path)
