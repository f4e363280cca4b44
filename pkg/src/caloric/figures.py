"""Deterministic matplotlib rendering for scenario report directories.

Figures are a presentation layer only: every number they show also lives in
the delimited tables next to them. Rendering is pinned (fixed size, dpi,
fonts from matplotlib defaults, explicit PNG metadata) so repeated runs with
the same seed produce byte-identical image files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = [
    "save_figure",
    "loglog_fit_figure",
    "mass_bar_figure",
    "profile_figure",
    "render_scenario_figures",
]

_DPI = 144
_FIGSIZE = (6.0, 4.0)
_METADATA = {"Software": "caloric"}


def save_figure(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI, metadata=_METADATA)
    plt.close(fig)
    return path


def loglog_fit_figure(
    scales: Sequence[float],
    values: Sequence[float],
    slope: float,
    *,
    xlabel: str,
    ylabel: str,
    title: str,
    path: str | Path,
) -> Path:
    """Log-log scatter with the least-squares line through the centroid."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    xs = [float(s) for s in scales]
    ys = [float(v) for v in values]
    ax.loglog(xs, ys, "o", color="tab:blue", label="measured")
    logx = [math.log(s) for s in xs]
    logy = [math.log(v) for v in ys]
    cx = sum(logx) / len(logx)
    cy = sum(logy) / len(logy)
    line = [math.exp(cy + slope * (lx - cx)) for lx in logx]
    ax.loglog(xs, line, "-", color="tab:orange", label=f"slope {slope:.3f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return save_figure(fig, path)


def mass_bar_figure(
    labels: Sequence[str],
    masses: Sequence[float],
    ses: Sequence[float],
    *,
    title: str,
    path: str | Path,
) -> Path:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    pos = range(len(labels))
    ax.bar(pos, masses, yerr=ses, color="tab:blue", capsize=3)
    ax.set_xticks(list(pos))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("mass")
    ax.set_title(title)
    fig.tight_layout()
    return save_figure(fig, path)


def profile_figure(
    curves: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    *,
    xlabel: str,
    ylabel: str,
    title: str,
    path: str | Path,
    logx: bool = False,
    logy: bool = False,
) -> Path:
    """Overlaid labelled curves, e.g. partial-sum or ladder profiles."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for label, xs, ys in curves:
        ax.plot(xs, ys, marker="o", label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return save_figure(fig, path)


def _rows(result, table: str) -> list[dict]:
    header, rows = result.tables[table]
    return [dict(zip(header, row)) for row in rows]


def render_scenario_figures(result, out_dir: str | Path) -> list[Path]:
    """Render the standard figures for a scenario result directory.

    Dispatches on the tables each scenario publishes; unknown scenarios
    render nothing. Returns the written paths.
    """
    out = Path(out_dir)
    written: list[Path] = []
    if "decay" in result.tables:
        rows = _rows(result, "decay")
        slope = next(
            (m["value"] for m in result.measurements if m["name"] == "slope"), 0.0
        )
        written.append(
            loglog_fit_figure(
                [r["R"] for r in rows],
                [r["mass"] for r in rows],
                slope,
                xlabel="R",
                ylabel="boundary mass",
                title=f"{result.scenario}: measure decay",
                path=out / "decay.png",
            )
        )
    if "obstacles" in result.tables:
        rows = _rows(result, "obstacles")
        labels = [f"j={int(r['j'])}" for r in rows] + ["infinity"]
        inf_mass = next(
            (m["value"] for m in result.measurements if m["name"] == "mass_infinity"),
            0.0,
        )
        written.append(
            mass_bar_figure(
                labels,
                [r["mass"] for r in rows] + [inf_mass],
                [r["se"] for r in rows] + [0.0],
                title=f"{result.scenario}: exit-mass split",
                path=out / "masses.png",
            )
        )
    if "ladder" in result.tables:
        rows = _rows(result, "ladder")
        curves = []
        for M in sorted({r["M"] for r in rows}):
            sub = [r for r in rows if r["M"] == M]
            sub.sort(key=lambda r: r["delta"], reverse=True)
            curves.append(
                (f"M={M}", [r["delta"] for r in sub], [r["deficit"] for r in sub])
            )
        written.append(
            profile_figure(
                curves,
                xlabel="pole distance",
                ylabel="deficit 1 - u",
                title=f"{result.scenario}: datum deficit along the ladder",
                path=out / "ladder.png",
                logx=True,
            )
        )
    if "wiener" in result.tables:
        rows = _rows(result, "wiener")
        curves = []
        for M in sorted({r["M"] for r in rows}):
            sub = [r for r in rows if r["M"] == M]
            sub.sort(key=lambda r: r["k"])
            curves.append((f"M={M}", [r["k"] for r in sub], [r["partial_sum"] for r in sub]))
        written.append(
            profile_figure(
                curves,
                xlabel="term index",
                ylabel="partial sum",
                title=f"{result.scenario}: series profile",
                path=out / "wiener.png",
            )
        )
    if "checks" in result.tables and result.scenario == "validation":
        rows = _rows(result, "checks")
        written.append(
            mass_bar_figure(
                [str(r["name"]) for r in rows],
                [1.0 if r["passed"] in (True, "true", 1) else 0.0 for r in rows],
                [0.0] * len(rows),
                title="validation: checks passed",
                path=out / "checks.png",
            )
        )
    return written
