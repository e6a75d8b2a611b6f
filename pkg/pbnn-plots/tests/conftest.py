"""Shared helpers: synthesized CSV tables matching the sampler CLI schemas."""

import csv

import pytest

BAND_HEADER = ("model", "dim", "t", "y_true", "mu_star", "sigma_star", "config_hash")
SWEEP_HEADER = (
    "batch_size",
    "num_batches",
    "test_avg_nll",
    "log10_acceptance",
    "coverage",
    "ace",
    "acceptance_rate",
    "J",
    "seed",
    "config_hash",
)


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


@pytest.fixture
def bands_csv(tmp_path):
    """Two models x two dims x three times, t deliberately unsorted."""
    rows = []
    for model in ("pbnn", "batched"):
        for dim in (0, 1):
            for t in (2, 0, 1):
                y = float(t + dim)
                rows.append((model, dim, t, y, y + 0.1, 0.5 + 0.1 * dim, "abc123"))
    return write_rows(tmp_path / "bands.csv", BAND_HEADER, rows)


@pytest.fixture
def sweep_csv(tmp_path):
    """Three batch sizes x two seeds with strictly monotone metrics."""
    rows = []
    for i, n in enumerate((15, 30, 60)):
        for seed in (0, 1):
            rows.append(
                (n, 100, 2.0 - 0.5 * i + 0.1 * seed, -1.0 - i, 0.60 + 0.05 * i, 0.08, 0.3, 1500, seed, "abc123")
            )
    return write_rows(tmp_path / "sweep.csv", SWEEP_HEADER, rows)
