"""Render risk reports as figures: risk and gain against dimension, one panel per loss."""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import RiskReport  # noqa: E402

__all__ = ["plot_report", "STYLE"]

STYLE = {
    "figure.figsize": (4.0 * 1.618, 4.0),
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}

_MARKERS = {"sample": "o", "spiked": "s", "ledoit-wolf": "^", "stein-isotonized": "v", "oracle": "x"}


def _series(report: RiskReport, loss: str, field: str) -> dict[str, tuple[list[int], list[float]]]:
    out: dict[str, tuple[list[int], list[float]]] = {}
    for row in sorted(report.rows, key=lambda r: (r.method, r.p)):
        val = getattr(row, field)
        if row.loss != loss or val is None:
            continue
        xs, ys = out.setdefault(row.method, ([], []))
        xs.append(row.p)
        ys.append(val)
    return out


def plot_report(report: RiskReport, out_dir: str | os.PathLike, stem: str = "risk") -> list[Path]:
    """Write ``<stem>_<loss>.png`` (risk, log scale) and ``<stem>_gain_<loss>.png`` per loss."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    losses = sorted({r.loss for r in report.rows})
    written = []
    with plt.rc_context(STYLE):
        for loss in losses:
            for field, name, ylabel, logy in (
                ("risk", f"{stem}_{loss}.png", f"{loss} risk", True),
                ("gain", f"{stem}_gain_{loss}.png", "gain over S", False),
            ):
                series = _series(report, loss, field)
                if not series:
                    continue
                fig, ax = plt.subplots()
                for method, (xs, ys) in series.items():
                    ax.plot(xs, ys, marker=_MARKERS.get(method, "."), label=method)
                if logy and all(y > 0 for _, ys in series.values() for y in ys):
                    ax.set_yscale("log")
                ax.set_xlabel("p")
                ax.set_ylabel(ylabel)
                ax.legend(frameon=False)
                fig.tight_layout()
                path = out / name
                fig.savefig(path)
                plt.close(fig)
                written.append(path)
    return written
