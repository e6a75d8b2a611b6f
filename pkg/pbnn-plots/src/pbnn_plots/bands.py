"""Prediction-band figures: truth, predictive mean, and one-sigma region.

Consumes the `bands.csv` table written by the benchmark driver, with
columns `model,dim,t,y_true,mu_star,sigma_star,config_hash`.  One stacked
panel is drawn per model tag, each showing the true series, the marginal
predictive mean mu*, and the shaded mu* +/- sigma* region in grey.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .io import SchemaError, parse_floats, read_table

BAND_COLUMNS = ("model", "dim", "t", "y_true", "mu_star", "sigma_star")


@dataclass(frozen=True)
class BandSeries:
    """One model's predictive band along a single output coordinate."""

    t: np.ndarray
    y_true: np.ndarray
    mu_star: np.ndarray
    sigma_star: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.t)
        if not (len(self.y_true) == len(self.mu_star) == len(self.sigma_star) == n):
            raise SchemaError("band series columns have mismatched lengths")
        if not np.all(self.sigma_star > 0):
            raise SchemaError("sigma_star must be positive")


def load_bands(path: str | Path, dim: int) -> list[tuple[str, BandSeries]]:
    """Band series for coordinate `dim`, one per model, in file order."""
    columns = read_table(path, BAND_COLUMNS)
    dims = parse_floats(columns, "dim", path)
    keep = [i for i, d in enumerate(dims) if int(d) == int(dim)]
    if not keep:
        seen = sorted({int(d) for d in dims})
        raise SchemaError(f"{path}: no rows with dim={dim} (file has dims {seen})")

    numeric = {name: parse_floats(columns, name, path) for name in ("t", "y_true", "mu_star", "sigma_star")}
    models: list[str] = []
    rows: dict[str, list[int]] = {}
    for i in keep:
        tag = columns["model"][i]
        if tag not in rows:
            rows[tag] = []
            models.append(tag)
        rows[tag].append(i)

    out = []
    for tag in models:
        idx = rows[tag]
        order = sorted(idx, key=lambda i: numeric["t"][i])
        series = BandSeries(
            *(np.array([numeric[name][i] for i in order]) for name in ("t", "y_true", "mu_star", "sigma_star"))
        )
        out.append((tag, series))
    return out


def plot_bands(csv_path: str | Path, dim: int, out_path: str | Path) -> Figure:
    """Render stacked band panels for coordinate `dim` and save the figure."""
    bands = load_bands(csv_path, dim)
    fig = Figure(figsize=(7.0, 2.2 * len(bands)), constrained_layout=True)
    axes = fig.subplots(nrows=len(bands), sharex=True, squeeze=False)[:, 0]
    for ax, (tag, s) in zip(axes, bands):
        ax.fill_between(s.t, s.mu_star - s.sigma_star, s.mu_star + s.sigma_star,
                        color="0.8", label="mu* +/- sigma*")
        marker = "o" if len(s.t) == 1 else None
        ax.plot(s.t, s.y_true, color="black", lw=1.0, marker=marker, label="truth")
        ax.plot(s.t, s.mu_star, color="tab:blue", lw=1.0, marker=marker, label="mu*")
        ax.set_ylabel(tag)
    axes[0].legend(loc="upper right", fontsize="small")
    axes[-1].set_xlabel("t")
    fig.suptitle(f"predictive bands, coordinate {int(dim)}")
    fig.savefig(out_path)
    return fig
