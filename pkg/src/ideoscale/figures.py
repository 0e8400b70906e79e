"""Report figures rendered to SVG files.

All rendering is non-interactive and deterministic: the Agg backend, a
fixed hash salt, and no embedded timestamps, so identical inputs produce
identical bytes.
"""
from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import RegressionReport  # noqa: E402

logger = logging.getLogger("ideoscale.figures")

plt.rcParams["svg.hashsalt"] = "ideoscale"
plt.rcParams["svg.fonttype"] = "path"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def render_outlet_scatter(network_means: dict, text_means: dict,
                          path: str | Path) -> None:
    """Outlet-level scatter: mean network score (x) vs mean text score (y)."""
    shared = sorted(set(network_means) & set(text_means))
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    xs = [network_means[g] for g in shared]
    ys = [text_means[g] for g in shared]
    ax.scatter(xs, ys, s=28, color="#30506d", zorder=3)
    for g, x, y in zip(shared, xs, ys):
        ax.annotate(g, (x, y), textcoords="offset points", xytext=(4, 3),
                    fontsize=7)
    ax.axhline(0.0, color="#bbbbbb", lw=0.8, zorder=1)
    ax.axvline(0.0, color="#bbbbbb", lw=0.8, zorder=1)
    ax.set_xlabel("mean network ideology score")
    ax.set_ylabel("mean text ideology score")
    ax.set_title("Outlet means: network vs text ideology")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_coefficients(report: RegressionReport, path: str | Path) -> None:
    """Coefficient plot: estimates with 95% intervals.

    Only coefficients whose interval excludes zero are drawn (the full
    table always goes to the CSV report); the intercept is omitted.
    """
    names = [n for n in report.order if n != "intercept"]
    shown = [n for n in names
             if report.coefficients[n].ci_low > 0 or report.coefficients[n].ci_high < 0]
    fig, ax = plt.subplots(figsize=(6.0, max(2.0, 0.4 * max(len(shown), 1) + 1.2)))
    if shown:
        ys = range(len(shown))
        ests = [report.coefficients[n].estimate for n in shown]
        errs = [
            [report.coefficients[n].estimate - report.coefficients[n].ci_low for n in shown],
            [report.coefficients[n].ci_high - report.coefficients[n].estimate for n in shown],
        ]
        ax.errorbar(ests, list(ys), xerr=errs, fmt="o", color="#30506d",
                    ecolor="#30506d", capsize=3)
        ax.set_yticks(list(ys))
        ax.set_yticklabels(shown, fontsize=8)
        ax.invert_yaxis()
    else:
        ax.text(0.5, 0.5, "no coefficients with 95% interval excluding zero",
                ha="center", va="center", transform=ax.transAxes, fontsize=9)
        ax.set_yticks([])
    ax.axvline(0.0, color="#bbbbbb", lw=0.8)
    ax.set_xlabel("estimate (95% interval)")
    ax.set_title(f"Regression coefficients (reference: {report.reference_group})")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_separation(dem_scores, rep_scores, path: str | Path) -> None:
    """Overlaid score histograms for registered D vs R accounts."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    bins = 40
    ax.hist(list(dem_scores), bins=bins, alpha=0.6, color="#2166ac",
            label="registered D", density=True)
    ax.hist(list(rep_scores), bins=bins, alpha=0.6, color="#b2182b",
            label="registered R", density=True)
    ax.set_xlabel("network ideology score")
    ax.set_ylabel("density")
    ax.set_title("Score separation by party registration")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
