"""Figure rendering for simulation reports.

Headless by design: the Agg backend is forced before pyplot loads, so runs
work in CI and over SSH. One report becomes one PNG with the three metric
series stacked on a shared epoch axis.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

SERIES = (
    ("gini", "gini of effective voting power", "tab:red"),
    ("participation", "plural participation", "tab:blue"),
    ("treasury", "treasury balance", "tab:green"),
)


def render_report_figure(report: dict, path) -> str:
    """Write the metric series of a report dict to a PNG; returns the path."""
    rows = report.get("epochs", [])
    epochs = [row["epoch"] for row in rows]
    panels = [(key, label, color) for key, label, color in SERIES if any(key in r for r in rows)]
    if not panels:
        panels = [SERIES[0]]

    fig, axes = plt.subplots(len(panels), 1, sharex=True, figsize=(8, 2.4 * len(panels)))
    if len(panels) == 1:
        axes = [axes]
    for ax, (key, label, color) in zip(axes, panels):
        values = [row.get(key, 0) for row in rows]
        ax.plot(epochs, values, color=color, marker="o", markersize=3, linewidth=1.2)
        ax.set_ylabel(label, fontsize=9)
        ax.grid(True, alpha=0.3)
        if key in ("gini", "participation"):
            ax.set_ylim(-0.05, 1.05)
    axes[-1].set_xlabel("epoch")

    title = f"{report.get('scenario', '?')} (seed {report.get('seed', '?')}, {report.get('mode', '?')})"
    attacks = report.get("attacks", [])
    if attacks:
        outcomes = ", ".join(f"{a.get('attack')}: {a.get('outcome')}" for a in attacks)
        title += "\n" + outcomes
    fig.suptitle(title, fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.92 if attacks else 0.95))
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)
