"""Losses over data subsets and the noisy loss-difference estimator.

The loss of a parameter vector on a set D is

    L_D(theta) = -log p(theta) - w * sum_{i in D} log p(y_i | x_i, theta),

with a Gaussian L2 prior log p(theta) = -lambda * ||theta||^2 (additive
constant fixed to zero) and an optional likelihood weight w = target_n/|D|
so that sub-sampled losses live on the scale of a size-target_n data set.

Given M mini-batches, the per-batch differences d_j = L_{D_j}(theta') -
L_{D_j}(theta) yield the mean estimate and its squared standard error

    delta = (1/M) sum_j d_j,
    chi2  = 1/(M(M-1)) * sum_j (d_j - delta)^2.

The prior difference enters every d_j identically, so it shifts delta but
contributes nothing to chi2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pendulum import SupervisedDataset

BATCH_MODES = ("with-replacement", "partition")


@dataclass(frozen=True)
class PriorSpec:
    lam: float = 1e-5
    kind: str = "gaussian-l2"

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.kind != "gaussian-l2":
            raise ValueError(f"unsupported prior kind {self.kind!r}")


def log_prior(theta: np.ndarray, prior: PriorSpec) -> float:
    """-lambda * ||theta||^2, up to an additive constant fixed to zero."""
    theta = np.asarray(theta, dtype=np.float64)
    return float(-prior.lam * theta @ theta)


def batch_loss(model, theta: np.ndarray, ds: SupervisedDataset, prior: PriorSpec) -> float:
    """Unweighted loss: prior term plus the summed per-item NLL, in data order."""
    return float(-log_prior(theta, prior) + np.sum(model.nll_items(theta, ds.x, ds.y)))


def weighted_loss(
    model, theta: np.ndarray, ds: SupervisedDataset, prior: PriorSpec, target_n: int
) -> float:
    """Loss with the likelihood re-scaled to a virtual data set size target_n."""
    if not target_n >= 1:
        raise ValueError("target_n must be >= 1")
    w = target_n / len(ds)
    return float(-log_prior(theta, prior) + w * np.sum(model.nll_items(theta, ds.x, ds.y)))


def grad_weighted_loss(
    model, theta: np.ndarray, ds: SupervisedDataset, prior: PriorSpec, target_n: int | None = None
) -> np.ndarray:
    """Gradient of `weighted_loss` (or of `batch_loss` when target_n is None)."""
    w = 1.0 if target_n is None else target_n / len(ds)
    return 2.0 * prior.lam * np.asarray(theta, dtype=np.float64) + model.grad_nll_sum(
        theta, ds.x, ds.y, weight=w
    )


# ---------------------------------------------------------------------------
# mini-batch plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MiniBatchPlan:
    """M batches of N items each; `with-replacement` is the default mode."""

    batch_size: int = 60
    num_batches: int = 100
    mode: str = "with-replacement"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.num_batches < 2:
            raise ValueError("num_batches must be >= 2 to estimate chi2")
        if self.mode not in BATCH_MODES:
            raise ValueError(f"mode must be one of {BATCH_MODES}")


def draw_minibatch_indices(n_items: int, plan: MiniBatchPlan, rng: np.random.Generator) -> np.ndarray:
    """Index matrix of shape (num_batches, batch_size) into a size-n_items set."""
    m, n = plan.num_batches, plan.batch_size
    if plan.mode == "with-replacement":
        return rng.integers(0, n_items, size=(m, n))
    if m * n > n_items:
        raise ValueError(
            f"partition mode needs num_batches*batch_size <= {n_items}, got {m * n}"
        )
    perm = rng.permutation(n_items)
    return perm[: m * n].reshape(m, n)


def draw_minibatches(
    train: SupervisedDataset, plan: MiniBatchPlan, rng: np.random.Generator
) -> list[SupervisedDataset]:
    idx = draw_minibatch_indices(len(train), plan, rng)
    return [train.subset(row) for row in idx]


# ---------------------------------------------------------------------------
# loss-difference estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossDiffEstimate:
    delta: float
    chi2: float
    num_batches: int
    per_batch: np.ndarray


def diff_stats(per_batch: np.ndarray) -> tuple[float, float]:
    """Mean difference and its squared standard error from per-batch values."""
    d = np.asarray(per_batch, dtype=np.float64)
    m = len(d)
    if m < 2:
        raise ValueError("need at least two batches")
    delta = float(np.mean(d))
    chi2 = float(np.sum((d - delta) ** 2) / (m * (m - 1)))
    return delta, chi2


def loss_diff_estimate(
    model,
    theta_prop: np.ndarray,
    theta_cur: np.ndarray,
    batches: list[SupervisedDataset],
    prior: PriorSpec,
    target_n: int | None = None,
) -> LossDiffEstimate:
    """Estimate L(theta') - L(theta) and its variance from mini-batches.

    All batches are evaluated for both parameter vectors (common random
    batches), so purely data-independent terms cancel out of chi2.
    """
    sizes = {len(b) for b in batches}
    if len(sizes) != 1:
        raise ValueError("all batches must have the same size")
    n = sizes.pop()
    x_all = np.concatenate([b.x for b in batches], axis=0)
    y_all = np.concatenate([b.y for b in batches], axis=0)
    return _diff_from_gathered(model, theta_prop, theta_cur, x_all, y_all, len(batches), n, prior, target_n)


def loss_diff_from_indices(
    model,
    theta_prop: np.ndarray,
    theta_cur: np.ndarray,
    train: SupervisedDataset,
    idx: np.ndarray,
    prior: PriorSpec,
    target_n: int | None = None,
) -> LossDiffEstimate:
    """Same estimate driven by an (M, N) index matrix; avoids list overhead."""
    m, n = idx.shape
    flat = idx.reshape(-1)
    return _diff_from_gathered(
        model, theta_prop, theta_cur, train.x[flat], train.y[flat], m, n, prior, target_n
    )


def _diff_from_gathered(model, theta_prop, theta_cur, x_all, y_all, m, n, prior, target_n):
    w = 1.0 if target_n is None else target_n / n
    nll_prop = model.nll_items(theta_prop, x_all, y_all).reshape(m, n)
    nll_cur = model.nll_items(theta_cur, x_all, y_all).reshape(m, n)
    prior_diff = -log_prior(theta_prop, prior) + log_prior(theta_cur, prior)
    per_batch = prior_diff + w * (nll_prop.sum(axis=1) - nll_cur.sum(axis=1))
    delta, chi2 = diff_stats(per_batch)
    return LossDiffEstimate(delta=delta, chi2=chi2, num_batches=m, per_batch=per_batch)
