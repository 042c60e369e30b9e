"""Static figure rendering for simulation output.

Figures are written to files (SVG by default) next to the delimited data;
there is no interactive display path.  Axes are linear, one polyline per
observable column, legend taken from column names.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .integrator import TimeSeries

_COLORS = ("tab:orange", "tab:green", "tab:red", "tab:purple", "tab:blue", "tab:brown", "tab:gray")


def _new_axes(title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.grid(alpha=0.3)
    ax.set_xlabel("time")
    if title:
        ax.set_title(title)
    return fig, ax


def save_timeseries_plot(series: TimeSeries, path, title=None) -> None:
    """One polyline per observable column of a single run."""
    fig, ax = _new_axes(title)
    for i, (name, col) in enumerate(series.observables.items()):
        color = _COLORS[i % len(_COLORS)]
        ax.plot(series.times, col, label=name, color=color)
        if series.mc_stderr and name in series.mc_stderr:
            se = series.mc_stderr[name]
            ax.fill_between(series.times, col - se, col + se, color=color, alpha=0.2, linewidth=0)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_overlay_plot(runs, column: str, path, title=None) -> None:
    """Overlay one column across labelled runs: ``runs = [(label, series), ...]``."""
    fig, ax = _new_axes(title)
    for i, (label, series) in enumerate(runs):
        ax.plot(
            series.times,
            series.column(column),
            label=str(label),
            color=_COLORS[i % len(_COLORS)],
        )
    ax.set_ylabel(column)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
