"""Posterior-predictive evaluation of a bag of parameter samples.

The predictive density is the uniform mixture over the J retained samples,
p(y|x) = (1/J) sum_j p(y | x, theta_j).  Reported are:

* avg_nll: -(1/L) sum_i log p(y_i|x_i), evaluated with a max-shifted
  log-sum-exp over the mixture components;
* per-coordinate mixture moments, mu*_d = mean_j mu_d^(j) and
  sigma*^2_d = mean_j(sigma^2_d^(j) + mu_d^(j)^2) - mu*_d^2;
* one-sigma coverage: the fraction of (item, coordinate) pairs with
  y inside mu* +- sigma*, and its absolute calibration error
  ACE = |0.682 - coverage|.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pendulum import SupervisedDataset

COVERAGE_TARGET = 0.682
_CHUNK = 32  # samples per forward block when streaming over J


@dataclass(frozen=True)
class PredictiveMoments:
    mu: np.ndarray  # (L, output_dim)
    sigma: np.ndarray  # (L, output_dim), one-sigma band half-width


def mixture_moments(mus: np.ndarray, variances: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of a uniform Gaussian mixture along axis 0."""
    mus = np.asarray(mus, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    mu_star = mus.mean(axis=0)
    var_star = (variances + mus**2).mean(axis=0) - mu_star**2
    # guard the tiny negative values float cancellation can produce
    return mu_star, np.maximum(var_star, 0.0)


def mixture_avg_nll(loglik: np.ndarray) -> float:
    """Average NLL from a (J, L) matrix of per-sample log densities."""
    ll = np.asarray(loglik, dtype=np.float64)
    if ll.ndim != 2:
        raise ValueError("expected a (J, L) matrix")
    m = ll.max(axis=0)
    mix = m + np.log(np.exp(ll - m).mean(axis=0))
    return float(-np.mean(mix))


def _require_samples(samples: np.ndarray) -> np.ndarray:
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[0] < 1:
        raise ValueError("need at least one posterior sample")
    return samples


def predictive_moments(model, samples: np.ndarray, x: np.ndarray) -> PredictiveMoments:
    """Mixture moments of the predictive density over a batch of inputs."""
    samples = _require_samples(samples)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    sum_mu = 0.0
    sum_second = 0.0
    for theta in samples:
        mu, var = model.forward(theta, x)
        sum_mu = sum_mu + mu
        sum_second = sum_second + var + mu**2
    j = samples.shape[0]
    mu_star = sum_mu / j
    var_star = np.maximum(sum_second / j - mu_star**2, 0.0)
    return PredictiveMoments(mu=mu_star, sigma=np.sqrt(var_star))


def avg_nll(model, samples: np.ndarray, ds: SupervisedDataset) -> float:
    """Mixture average NLL, streamed over samples with a running max shift."""
    samples = _require_samples(samples)
    j = samples.shape[0]
    run_max = np.full(len(ds), -np.inf)
    run_sum = np.zeros(len(ds))
    for start in range(0, j, _CHUNK):
        block = samples[start : start + _CHUNK]
        ll = np.stack([-model.nll_items(theta, ds.x, ds.y) for theta in block])
        m = np.maximum(run_max, ll.max(axis=0))
        run_sum = run_sum * np.exp(run_max - m) + np.exp(ll - m).sum(axis=0)
        run_max = m
    mix = run_max + np.log(run_sum / j)
    return float(-np.mean(mix))


def coverage_from_moments(y: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> tuple[float, float]:
    """One-sigma empirical coverage over all (item, coordinate) pairs, and ACE."""
    inside = np.abs(np.asarray(y) - mu) <= sigma
    coverage = float(inside.mean())
    return coverage, abs(COVERAGE_TARGET - coverage)


def coverage_and_ace(model, samples: np.ndarray, ds: SupervisedDataset) -> tuple[float, float]:
    pm = predictive_moments(model, samples, ds.x)
    return coverage_from_moments(ds.y, pm.mu, pm.sigma)


# ---------------------------------------------------------------------------
# report rows
# ---------------------------------------------------------------------------

REPORT_COLUMNS = (
    "sampler",
    "N",
    "M",
    "split",
    "avg_nll",
    "coverage",
    "ace",
    "acceptance_rate",
    "J",
    "seed",
    "config_hash",
)


@dataclass(frozen=True)
class EvalReport:
    sampler: str
    n: int
    m: int
    split: str
    avg_nll: float
    coverage: float
    ace: float
    acceptance_rate: float
    j: int
    seed: int
    config_hash: str = ""

    def row(self) -> list:
        return [
            self.sampler,
            self.n,
            self.m,
            self.split,
            repr(self.avg_nll),
            repr(self.coverage),
            repr(self.ace),
            repr(self.acceptance_rate),
            self.j,
            self.seed,
            self.config_hash,
        ]


def evaluate_split(
    model,
    samples: np.ndarray,
    ds: SupervisedDataset,
    *,
    sampler: str,
    n: int,
    m: int,
    split: str,
    acceptance_rate: float,
    seed: int,
    config_hash: str = "",
) -> EvalReport:
    """Assemble one report row for a (sampler, split) pair."""
    nll = avg_nll(model, samples, ds)
    coverage, ace = coverage_and_ace(model, samples, ds)
    return EvalReport(
        sampler=sampler,
        n=n,
        m=m,
        split=split,
        avg_nll=nll,
        coverage=coverage,
        ace=ace,
        acceptance_rate=acceptance_rate,
        j=int(np.atleast_2d(samples).shape[0]),
        seed=seed,
        config_hash=config_hash,
    )


def write_report_csv(path, reports: list[EvalReport]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow(r.row())


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
