"""Figure rendering for the report paths.

The evaluate and agree commands write these PNGs next to their TSV/CSV
output.  Charts only; no cartography.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .agreement import AgreementReport
from .metrics import EvalReport


def plot_region_eval(report: EvalReport, path) -> None:
    """Per-language F1, regional model vs baseline, with the diagonal."""
    geo = [report.geo_scores[l].f1 for l in report.languages]
    base = [report.base_scores[l].f1 for l in report.languages]
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.plot([0, 1], [0, 1], color="0.7", lw=1, zorder=1)
    ax.scatter(base, geo, s=28, color="#1f6fb4", zorder=2)
    for lang, b, g in zip(report.languages, base, geo):
        if abs(g - b) > 0.05:
            ax.annotate(lang, (b, g), fontsize=8,
                        xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("baseline F1")
    ax.set_ylabel("regional F1")
    suffix = " (local only)" if report.local_only else ""
    ax.set_title(f"{report.region}{suffix}: macro-F "
                 f"{report.geo_macro.f1:.3f} vs {report.base_macro.f1:.3f}")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, lw=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_eval_summary(reports: list[EvalReport], path) -> None:
    """Grouped horizontal bars of macro-F per region, both models."""
    regions = [r.region for r in reports]
    geo = [r.geo_macro.f1 for r in reports]
    base = [r.base_macro.f1 for r in reports]
    ypos = range(len(regions))
    fig, ax = plt.subplots(figsize=(7, 0.5 * len(regions) + 1.5))
    ax.barh([y + 0.2 for y in ypos], geo, height=0.38,
            label="regional", color="#1f6fb4")
    ax.barh([y - 0.2 for y in ypos], base, height=0.38,
            label="baseline", color="#b4571f")
    ax.set_yticks(list(ypos), regions)
    ax.invert_yaxis()
    ax.set_xlabel("macro F1")
    ax.set_xlim(0, 1.0)
    ax.legend(loc="lower right")
    ax.grid(True, axis="x", lw=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_agreement_by_group(report: AgreementReport, path,
                            max_groups: int = 40) -> None:
    """Horizontal bars of agreement rate per group, lowest first."""
    rows = sorted(report.groups.items(), key=lambda item: item[1].rate)
    rows = rows[:max_groups]
    keys = [k for k, _ in rows]
    rates = [g.rate for _, g in rows]
    fig, ax = plt.subplots(figsize=(7, 0.3 * len(rows) + 1.5))
    ax.barh(range(len(rows)), rates, color="#3c7a3c")
    ax.set_yticks(range(len(rows)), keys, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("agreement rate")
    ax.set_xlim(0, 1.0)
    overall = report.overall
    ax.axvline(overall.rate, color="0.3", lw=1, ls="--",
               label=f"overall {overall.rate:.3f}")
    ax.legend(loc="lower right")
    ax.set_title(f"model agreement by {report.group_by}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
