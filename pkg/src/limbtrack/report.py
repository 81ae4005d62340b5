"""Figure rendering for evaluation reports.

Evaluation commands write a delimited table plus, alongside it, a PNG
figure summarizing the same numbers. Uses the Agg backend so rendering
works headless; metadata is pinned for byte-stable output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import ApReport, MotaReport

_SAVEFIG_KW = dict(dpi=120, metadata={"Software": None})


def render_mota_figure(report: MotaReport, path) -> None:
    """Per-part MOTA bars plus an error-count breakdown."""
    rows = [report.rows[pid] for pid in sorted(report.rows)]
    names = [r.part for r in rows]
    motas = [r.mota for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    x = np.arange(len(rows))
    ax1.bar(x, motas, color="tab:blue")
    ax1.axhline(report.mean_mota, color="tab:red", ls="--", lw=1,
                label=f"average {report.mean_mota:.3f}")
    ax1.set_xticks(x, names, rotation=60, ha="right", fontsize=8)
    ax1.set_ylabel("MOTA")
    ax1.set_ylim(min(0.0, min((m for m in motas if m == m), default=0.0)), 1.05)
    ax1.legend(fontsize=8)
    ax1.set_title("tracking accuracy per joint")

    fn = [r.fn for r in rows]
    fp = [r.fp for r in rows]
    idsw = [r.idsw for r in rows]
    ax2.bar(x, fn, label="misses", color="tab:orange")
    ax2.bar(x, fp, bottom=fn, label="false positives", color="tab:green")
    ax2.bar(x, idsw, bottom=[a + b for a, b in zip(fn, fp)], label="id switches",
            color="tab:purple")
    ax2.set_xticks(x, names, rotation=60, ha="right", fontsize=8)
    ax2.set_ylabel("error counts")
    ax2.legend(fontsize=8)
    ax2.set_title("error breakdown")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_ap_figure(report: ApReport, path) -> None:
    """AP bars and the per-part precision-recall curves."""
    pr_curves = report.pr_curves
    part_ids = sorted(report.per_part)
    names = [report.part_names[p] for p in part_ids]
    values = [report.per_part[p] if report.per_part[p] is not None else 0.0
              for p in part_ids]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    x = np.arange(len(part_ids))
    ax1.bar(x, values, color="tab:blue")
    ax1.axhline(report.mean, color="tab:red", ls="--", lw=1,
                label=f"mean {report.mean:.3f}")
    ax1.set_xticks(x, names, rotation=60, ha="right", fontsize=8)
    ax1.set_ylabel("AP")
    ax1.set_ylim(0, 1.05)
    ax1.legend(fontsize=8)
    ax1.set_title("average precision per joint")

    cmap = plt.get_cmap("tab20")
    for i, pid in enumerate(part_ids):
        recalls, precisions = pr_curves.get(pid, ((), ()))
        if len(recalls):
            ax2.plot(recalls, precisions, lw=1, color=cmap(i % 20),
                     label=report.part_names[pid])
    ax2.set_xlabel("recall")
    ax2.set_ylabel("precision")
    ax2.set_xlim(0, 1.02)
    ax2.set_ylim(0, 1.02)
    ax2.legend(fontsize=6, ncol=2)
    ax2.set_title("precision-recall")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
