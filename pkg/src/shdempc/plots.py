"""Static figures rendered from emitted CSV files.

Imported only when plots are requested, so matplotlib stays optional.
"""

from __future__ import annotations

import csv
import statistics
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _columns(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [r[k] for r in rows] for k in (rows[0] if rows else {})}


def plot_run(out: Path) -> list[Path]:
    """Cumulative mutations, global cost, mean target and final layout of one run."""
    out = Path(out)
    g = _columns(out / "global.csv")
    f = _columns(out / "final.csv")
    k = [int(s) for s in g["sample"]]
    panels = [
        ("mutations.png", "cumulative mutations", [int(v) for v in g["cumulative_mutations"]]),
        ("global_cost.png", "global cost V", [float(v) for v in g["V"]]),
        ("mean_target.png", "mean stationary target [m]", [float(v) for v in g["mean_target"]]),
    ]
    paths = []
    for name, label, y in panels:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot(k, y, lw=1.2)
        ax.set_xlabel("sample")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(out / name, dpi=120)
        plt.close(fig)
        paths.append(out / name)

    fig, ax = plt.subplots(figsize=(6, 2.5))
    pos = [float(v) for v in f["position"]]
    for i, x in enumerate(pos):
        ax.add_patch(plt.Rectangle((x - 0.125, i - 0.4), 0.25, 0.8, alpha=0.5,
                                   color=f"C{int(f['level'][i]) - 1}"))
    ax.set_xlim(min(pos) - 0.3, max(pos) + 0.3)
    ax.set_ylim(-1, len(pos))
    ax.set_xlabel("position [m]")
    ax.set_ylabel("plate")
    fig.tight_layout()
    fig.savefig(out / "final_layout.png", dpi=120)
    plt.close(fig)
    paths.append(out / "final_layout.png")
    return paths


def plot_scaling(out: Path) -> Path:
    """Median iterations-to-settle against chain length for each variant."""
    out = Path(out)
    c = _columns(out / "scaling.csv")
    cells: dict = {}
    for v, n, s in zip(c["variant"], c["n_agents"], c["settle"]):
        cells.setdefault(v, {}).setdefault(int(n), []).append(int(s))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for v, by_n in sorted(cells.items()):
        Ns = sorted(by_n)
        med = [statistics.median(by_n[n]) for n in Ns]
        ax.plot(Ns, med, marker="o", label=v)
    ax.set_xlabel("number of plates N")
    ax.set_ylabel("iterations to settle (median)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out / "scaling.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
