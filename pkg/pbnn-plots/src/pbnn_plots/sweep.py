"""Batch-size trade-off figure: NLL, log-acceptance, and coverage vs N.

Consumes the `sweep.csv` table written by the sweep driver, with one row
per (batch_size, seed).  Rows are grouped by batch size and averaged over
seeds; the figure stacks three aligned panels over the shared N axis:
test average NLL, log10 acceptance rate, and one-sigma coverage with the
0.682 nominal level drawn as a reference line.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .io import parse_floats, read_table

SWEEP_COLUMNS = ("batch_size", "test_avg_nll", "log10_acceptance", "coverage")
NOMINAL_COVERAGE = 0.682


@dataclass(frozen=True)
class SweepTable:
    """Seed-averaged sweep series, sorted by ascending batch size."""

    batch_size: np.ndarray
    test_avg_nll: np.ndarray
    log10_acceptance: np.ndarray
    coverage: np.ndarray
    seeds_per_point: np.ndarray


def load_sweep(path: str | Path) -> SweepTable:
    """Group sweep rows by batch size and average the metrics over seeds."""
    columns = read_table(path, SWEEP_COLUMNS)
    raw = {name: np.array(parse_floats(columns, name, path)) for name in SWEEP_COLUMNS}
    sizes = np.unique(raw["batch_size"])
    series = {name: [] for name in SWEEP_COLUMNS[1:]}
    counts = []
    for n in sizes:
        mask = raw["batch_size"] == n
        counts.append(int(mask.sum()))
        for name in series:
            series[name].append(float(raw[name][mask].mean()))
    return SweepTable(
        batch_size=sizes,
        test_avg_nll=np.array(series["test_avg_nll"]),
        log10_acceptance=np.array(series["log10_acceptance"]),
        coverage=np.array(series["coverage"]),
        seeds_per_point=np.array(counts),
    )


def plot_sweep(csv_path: str | Path, out_path: str | Path) -> Figure:
    """Render the three aligned sweep panels and save the figure."""
    table = load_sweep(csv_path)
    fig = Figure(figsize=(6.0, 6.5), constrained_layout=True)
    axes = fig.subplots(nrows=3, sharex=True, squeeze=False)[:, 0]
    panels = (
        (axes[0], table.test_avg_nll, "test avg NLL"),
        (axes[1], table.log10_acceptance, "log10 acceptance"),
        (axes[2], table.coverage, "coverage"),
    )
    single_point = len(table.batch_size) == 1
    for ax, values, label in panels:
        if single_point:
            ax.scatter(table.batch_size, values, color="tab:blue")
        else:
            ax.plot(table.batch_size, values, color="tab:blue", marker="o")
        ax.set_ylabel(label)
    axes[2].axhline(NOMINAL_COVERAGE, color="0.4", ls="--", label=f"nominal {NOMINAL_COVERAGE}")
    axes[2].legend(loc="best", fontsize="small")
    if not single_point:
        axes[2].set_xscale("log", base=2)
        axes[2].set_xticks(list(table.batch_size))
        axes[2].set_xticklabels([str(int(n)) for n in table.batch_size])
    axes[2].set_xlabel("mini-batch size N")
    fig.suptitle("batch-size trade-off")
    fig.savefig(out_path)
    return fig
