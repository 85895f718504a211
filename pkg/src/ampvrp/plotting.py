"""Figure rendering for solutions, benchmark reports and parameter studies.

Everything draws straight to a file through the Agg backend, so the helpers
work in headless runs; each function returns the path it wrote.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .amp import RoundStats
from .model import Instance, Solution


def plot_solution(instance: Instance, solution: Solution, path,
                  title: Optional[str] = None) -> Path:
    """Draw the routes over the customer map, one colour per vehicle.

    Requires coordinates on every location; instances loaded from pure
    matrix data cannot be drawn.
    """
    for loc in instance.locations:
        if loc.x is None or loc.y is None:
            raise ValueError(
                f"location {loc.id} has no coordinates; nothing to draw")

    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 8))
    cmap = plt.get_cmap("tab20")

    xs = [loc.x for loc in instance.customers]
    ys = [loc.y for loc in instance.customers]
    ax.scatter(xs, ys, s=18, c="0.55", zorder=2)
    ax.scatter([instance.depot.x], [instance.depot.y], marker="s", s=90,
               c="black", zorder=4, label="depot")

    seen = set()
    for drive in solution.drives:
        colour = cmap(drive.vehicle_id % 20)
        label = None
        if drive.vehicle_id not in seen:
            seen.add(drive.vehicle_id)
            label = f"vehicle {drive.vehicle_id}"
        px = [instance.locations[v].x for v in drive.visit_sequence]
        py = [instance.locations[v].y for v in drive.visit_sequence]
        ax.plot(px, py, "-", color=colour, linewidth=1.3, alpha=0.85,
                zorder=3, label=label)

    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_title(title if title is not None else instance.name)
    ax.set_aspect("equal", adjustable="datalim")
    if len(seen) <= 12:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_rounds(rounds: Sequence[RoundStats], path,
                title: Optional[str] = None) -> Path:
    """Per-round start costs: mean with a std band, plus the round best."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    idx = [rs.round_index for rs in rounds]
    means = [rs.mean for rs in rounds]
    stds = [rs.std for rs in rounds]
    bests = [rs.best for rs in rounds]

    ax.errorbar(idx, means, yerr=stds, fmt="o-", capsize=4, color="C0",
                label="start mean and std")
    ax.plot(idx, bests, "s--", color="C2", label="round best")
    for rs in rounds:
        ax.plot([rs.round_index] * len(rs.costs), rs.costs, ".",
                color="0.6", markersize=4, zorder=1)

    ax.set_xlabel("round")
    ax.set_ylabel("cost")
    ax.set_xticks(idx)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_gaps(rows: Sequence[Mapping], path) -> Path:
    """Benchmark gaps to the best-known values as horizontal bars.

    ``rows`` follow the benchmark report columns; instances without a known
    reference are skipped.
    """
    path = Path(path)
    named = [r for r in rows
             if r.get("best_gap_pct") not in (None, "") and r.get("instance")]
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.45 * len(named) + 1.2)))
    ypos = range(len(named))
    best = [float(r["best_gap_pct"]) for r in named]
    mean = [float(r["mean_gap_pct"]) for r in named]

    ax.barh([y + 0.18 for y in ypos], mean, height=0.34, color="C1",
            label="mean gap")
    ax.barh([y - 0.18 for y in ypos], best, height=0.34, color="C0",
            label="best gap")
    ax.set_yticks(list(ypos))
    ax.set_yticklabels([r["instance"] for r in named], fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("gap to best known [%]")
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_diversity(rows: Sequence[Mapping], path) -> Path:
    """Construction diversity and cost against the savings dropout rate.

    One line per (instance, lambda) pair in each panel: left the distinct-arc
    diversity of the built solutions, right their mean cost.
    """
    path = Path(path)
    fig, (ax_d, ax_c) = plt.subplots(1, 2, figsize=(10, 4.2))

    groups = {}
    for r in rows:
        groups.setdefault((str(r["instance"]), float(r["lam"])), []).append(r)

    for gi, (key, grp) in enumerate(sorted(groups.items())):
        grp = sorted(grp, key=lambda r: float(r["dropout"]))
        xs = [float(r["dropout"]) for r in grp]
        label = f"{key[0]} lam={key[1]:g}"
        colour = plt.get_cmap("tab10")(gi % 10)
        ax_d.plot(xs, [float(r["initial_diversity"]) for r in grp], "o-",
                  color=colour, label=label)
        ax_c.plot(xs, [float(r["initial_mean"]) for r in grp], "o-",
                  color=colour, label=label)

    ax_d.set_xlabel("dropout probability")
    ax_d.set_ylabel("distinct arcs / mean arcs per build")
    ax_c.set_xlabel("dropout probability")
    ax_c.set_ylabel("mean construction cost")
    if len(groups) <= 10:
        ax_d.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
