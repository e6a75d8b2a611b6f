"""Metropolis-Hastings variants driven by noisy mini-batch loss estimates.

The exact-in-expectation rule accepts a proposal theta' with probability

    A = min(1, (q(theta|theta') / q(theta'|theta)) * exp(-delta - chi2/2)),

where delta estimates L(theta') - L(theta) from M mini-batches and chi2
estimates the variance of delta; subtracting half the variance compensates,
on average, for the noise in delta (the estimate's own noise is ignored).
Baselines share the same machinery: `vanilla` uses the full-data loss with
no noise term, `batched` drops the penalty, `tempered` re-weights the full
likelihood down to a virtual data set size, and `sgld` is an unadjusted
Langevin update on mini-batch gradients.

All randomness comes from named per-seed streams (proposal / batches /
accept / noise), so runs are reproducible and chains are pairable across
samplers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .losses import (
    MiniBatchPlan,
    PriorSpec,
    batch_loss,
    draw_minibatch_indices,
    grad_weighted_loss,
    loss_diff_from_indices,
    weighted_loss,
)
from .pendulum import SupervisedDataset
from .rng import stream

SAMPLER_TAGS = ("pbnn", "vanilla", "batched", "tempered", "sgld")
PROPOSAL_KINDS = ("symmetric-gaussian", "langevin-drift")


class DivergedChainError(RuntimeError):
    """Chain state became non-finite; carries the partial record if available."""

    def __init__(self, message: str, record: "ChainRecord | None" = None):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class ProposalSpec:
    kind: str = "symmetric-gaussian"
    step: float = 0.01

    def __post_init__(self) -> None:
        if self.kind not in PROPOSAL_KINDS:
            raise ValueError(f"proposal kind must be one of {PROPOSAL_KINDS}")
        if not self.step > 0:
            raise ValueError("proposal step must be positive")


@dataclass(frozen=True)
class ChainConfig:
    sampler: str = "pbnn"
    n_steps: int = 500_000
    burn_in: int = 200_000
    thin: int = 100
    seed: int = 0
    proposal: ProposalSpec = field(default_factory=ProposalSpec)
    prior: PriorSpec = field(default_factory=PriorSpec)
    plan: MiniBatchPlan | None = field(default_factory=MiniBatchPlan)
    target_n: int | None = 60
    sgld_eta: float = 1e-5
    sgld_batch_size: int = 60

    def __post_init__(self) -> None:
        if self.sampler not in SAMPLER_TAGS:
            raise ValueError(f"sampler must be one of {SAMPLER_TAGS}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_steps")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if (self.n_steps - self.burn_in) // self.thin < 1:
            raise ValueError("no samples would be retained; shrink burn_in or thin")
        if self.sampler in ("pbnn", "batched") and self.plan is None:
            raise ValueError(f"sampler {self.sampler!r} needs a mini-batch plan")
        if self.sampler == "tempered" and self.target_n is None:
            raise ValueError("tempered sampler needs target_n")
        if self.sampler == "sgld":
            if not self.sgld_eta > 0:
                raise ValueError("sgld_eta must be positive")
            if self.sgld_batch_size < 1:
                raise ValueError("sgld_batch_size must be >= 1")

    @property
    def n_samples(self) -> int:
        return (self.n_steps - self.burn_in) // self.thin


@dataclass(frozen=True)
class NoisyAcceptanceInputs:
    delta: float
    sigma2: float
    log_q_ratio: float = 0.0


def log_accept_prob(delta: float, sigma2: float, log_q_ratio: float = 0.0) -> float:
    """log of min(1, q-ratio * exp(-delta - sigma2/2)); -inf for non-finite delta."""
    if not math.isfinite(delta):
        return -math.inf
    return min(0.0, log_q_ratio - delta - 0.5 * sigma2)


def penalty_acceptance(inputs: NoisyAcceptanceInputs) -> float:
    return math.exp(log_accept_prob(inputs.delta, inputs.sigma2, inputs.log_q_ratio))


def mh_accept(log_alpha: float, rng: np.random.Generator) -> bool:
    return math.log(rng.random()) < log_alpha


# ---------------------------------------------------------------------------
# proposals
# ---------------------------------------------------------------------------


def gaussian_proposal(theta: np.ndarray, step: float, rng: np.random.Generator):
    """Isotropic random-walk proposal; symmetric, so the q-ratio is zero in log."""
    return theta + step * rng.standard_normal(theta.shape), 0.0


def langevin_proposal(theta: np.ndarray, eta: float, grad_fn, rng: np.random.Generator):
    """Gradient-drifted Gaussian proposal q(theta'|theta) = N(theta - eta*g, 2*eta).

    Returns the proposal and the exact log q(theta|theta') - log q(theta'|theta),
    which costs one extra gradient evaluation at the proposal.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    g_cur = grad_fn(theta)
    noise = math.sqrt(2.0 * eta) * rng.standard_normal(theta.shape)
    theta_prop = theta - eta * g_cur + noise
    g_prop = grad_fn(theta_prop)
    fwd = theta_prop - theta + eta * g_cur  # == noise
    rev = theta - theta_prop + eta * g_prop
    log_q_ratio = (float(fwd @ fwd) - float(rev @ rev)) / (4.0 * eta)
    return theta_prop, log_q_ratio


def sgld_update(theta: np.ndarray, grad: np.ndarray, eta: float, eps: np.ndarray) -> np.ndarray:
    """One unadjusted Langevin step theta - eta*grad + sqrt(2*eta)*eps."""
    return theta - eta * grad + math.sqrt(2.0 * eta) * eps


# ---------------------------------------------------------------------------
# per-step transitions
# ---------------------------------------------------------------------------


@dataclass
class StepResult:
    theta: np.ndarray
    delta: float
    chi2: float
    accepted: bool
    log_q_ratio: float
    cur_loss: float | None = None


@dataclass
class _Streams:
    proposal: np.random.Generator
    batches: np.random.Generator
    accept: np.random.Generator
    noise: np.random.Generator

    @staticmethod
    def for_seed(seed: int) -> "_Streams":
        return _Streams(
            proposal=stream(seed, "proposal"),
            batches=stream(seed, "batches"),
            accept=stream(seed, "accept"),
            noise=stream(seed, "noise"),
        )


def _target_loss(model, theta, cfg: ChainConfig, train: SupervisedDataset) -> float:
    if cfg.sampler == "tempered":
        return weighted_loss(model, theta, train, cfg.prior, cfg.target_n)
    return batch_loss(model, theta, train, cfg.prior)


def _drift_grad_fn(model, cfg: ChainConfig, train: SupervisedDataset):
    """Full-data gradient of the sampler's target loss, for langevin-drift."""
    if cfg.sampler == "tempered":
        target_n = cfg.target_n
    elif cfg.sampler in ("pbnn", "batched"):
        target_n = cfg.plan.batch_size
    else:
        target_n = None
    return lambda th: grad_weighted_loss(model, th, train, cfg.prior, target_n)


def _propose(model, theta, cfg: ChainConfig, train, rngs: _Streams):
    if cfg.proposal.kind == "symmetric-gaussian":
        return gaussian_proposal(theta, cfg.proposal.step, rngs.proposal)
    return langevin_proposal(theta, cfg.proposal.step, _drift_grad_fn(model, cfg, train), rngs.proposal)


def exact_step(
    model, theta, cfg: ChainConfig, train: SupervisedDataset, rngs: _Streams, cur_loss=None
) -> StepResult:
    """Full-data MH step (vanilla, and tempered via the weighted target)."""
    if cur_loss is None:
        cur_loss = _target_loss(model, theta, cfg, train)
    if not math.isfinite(cur_loss):
        raise DivergedChainError("current loss is non-finite")
    theta_prop, lqr = _propose(model, theta, cfg, train, rngs)
    prop_loss = _target_loss(model, theta_prop, cfg, train)
    delta = prop_loss - cur_loss
    accepted = mh_accept(log_accept_prob(delta, 0.0, lqr), rngs.accept)
    if accepted:
        return StepResult(theta_prop, delta, 0.0, True, lqr, prop_loss)
    return StepResult(theta, delta, 0.0, False, lqr, cur_loss)


def vanilla_step(model, theta, cfg, train, rngs, cur_loss=None) -> StepResult:
    return exact_step(model, theta, cfg, train, rngs, cur_loss)


def tempered_step(model, theta, cfg, train, rngs, cur_loss=None) -> StepResult:
    return exact_step(model, theta, cfg, train, rngs, cur_loss)


def _noisy_step(model, theta, cfg, train, rngs, penalty: bool) -> StepResult:
    """Shared body of the batched (no penalty) and pbnn (penalised) steps.

    Fresh mini-batches every step; the same batches score both parameter
    vectors so their difference is a paired estimate.
    """
    theta_prop, lqr = _propose(model, theta, cfg, train, rngs)
    idx = draw_minibatch_indices(len(train), cfg.plan, rngs.batches)
    est = loss_diff_from_indices(model, theta_prop, theta, train, idx, cfg.prior)
    sigma2 = est.chi2 if penalty else 0.0
    accepted = mh_accept(log_accept_prob(est.delta, sigma2, lqr), rngs.accept)
    return StepResult(theta_prop if accepted else theta, est.delta, est.chi2, accepted, lqr)


def batched_step(model, theta, cfg, train, rngs) -> StepResult:
    return _noisy_step(model, theta, cfg, train, rngs, penalty=False)


def pbnn_step(model, theta, cfg, train, rngs) -> StepResult:
    return _noisy_step(model, theta, cfg, train, rngs, penalty=True)


def sgld_step(model, theta, cfg, train, rngs) -> StepResult:
    """Unadjusted Langevin update on a fresh mini-batch gradient."""
    n = len(train)
    k = min(cfg.sgld_batch_size, n)
    idx = rngs.batches.choice(n, size=k, replace=False)
    batch = train.subset(idx)
    grad = grad_weighted_loss(model, theta, batch, cfg.prior, cfg.target_n)
    eps = rngs.noise.standard_normal(theta.shape)
    theta_next = sgld_update(theta, grad, cfg.sgld_eta, eps)
    if not np.all(np.isfinite(theta_next)):
        raise DivergedChainError("sgld update produced non-finite parameters")
    return StepResult(theta_next, 0.0, 0.0, True, 0.0)


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------


@dataclass
class ChainRecord:
    """Thinned samples plus the per-step diagnostics of one chain."""

    samples: np.ndarray  # (n_samples, dim)
    step_log: np.ndarray  # (n_steps, 4): delta, chi2, accepted, log_q_ratio
    accept_count: int
    n_steps: int
    final_theta: np.ndarray
    sampler: str
    seed: int

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.n_steps


@dataclass
class ChainCheckpoint:
    completed: int
    theta: np.ndarray
    cur_loss: float | None
    accept_count: int
    samples: list[np.ndarray]
    step_rows: list[tuple[float, float, float, float]]
    rng_states: dict


def _checkpoint_of(state: dict) -> ChainCheckpoint:
    rngs: _Streams = state["rngs"]
    return ChainCheckpoint(
        completed=state["t"],
        theta=state["theta"].copy(),
        cur_loss=state["cur_loss"],
        accept_count=state["accept_count"],
        samples=[s.copy() for s in state["samples"]],
        step_rows=list(state["step_rows"]),
        rng_states={
            name: getattr(rngs, name).bit_generator.state
            for name in ("proposal", "batches", "accept", "noise")
        },
    )


def run_chain(
    model,
    cfg: ChainConfig,
    train: SupervisedDataset,
    theta0: np.ndarray,
    checkpoint_path=None,
    checkpoint_every: int = 0,
    resume: ChainCheckpoint | None = None,
) -> ChainRecord:
    """Run one chain; returns the thinned samples and per-step diagnostics.

    Samples are retained every `thin`-th step once `burn_in` steps are done,
    so the record holds (n_steps - burn_in) // thin parameter vectors.  If a
    checkpoint path is given, a resumable snapshot is written every
    `checkpoint_every` steps and the run can be continued bit-identically.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    if theta0.shape != (model.dim,):
        raise ValueError(f"theta0 must have shape ({model.dim},)")

    if resume is not None:
        rngs = _Streams.for_seed(cfg.seed)
        for name, st in resume.rng_states.items():
            getattr(rngs, name).bit_generator.state = st
        state = {
            "t": resume.completed,
            "theta": resume.theta.copy(),
            "cur_loss": resume.cur_loss,
            "accept_count": resume.accept_count,
            "samples": list(resume.samples),
            "step_rows": list(resume.step_rows),
            "rngs": rngs,
        }
    else:
        state = {
            "t": 0,
            "theta": theta0.copy(),
            "cur_loss": None,
            "accept_count": 0,
            "samples": [],
            "step_rows": [],
            "rngs": _Streams.for_seed(cfg.seed),
        }

    step_fn = SAMPLERS[cfg.sampler]
    uses_cache = cfg.sampler in ("vanilla", "tempered")

    def make_record() -> ChainRecord:
        n_kept = len(state["samples"])
        samples = (
            np.stack(state["samples"]) if n_kept else np.empty((0, model.dim), dtype=np.float64)
        )
        return ChainRecord(
            samples=samples,
            step_log=np.array(state["step_rows"], dtype=np.float64).reshape(-1, 4),
            accept_count=state["accept_count"],
            n_steps=state["t"],
            final_theta=state["theta"].copy(),
            sampler=cfg.sampler,
            seed=cfg.seed,
        )

    while state["t"] < cfg.n_steps:
        t = state["t"]
        try:
            if uses_cache:
                res = step_fn(model, state["theta"], cfg, train, state["rngs"], state["cur_loss"])
                state["cur_loss"] = res.cur_loss
            else:
                res = step_fn(model, state["theta"], cfg, train, state["rngs"])
        except DivergedChainError as err:
            raise DivergedChainError(str(err), make_record()) from None
        state["theta"] = res.theta
        state["accept_count"] += res.accepted
        state["step_rows"].append((res.delta, res.chi2, float(res.accepted), res.log_q_ratio))
        if t >= cfg.burn_in and (t - cfg.burn_in + 1) % cfg.thin == 0:
            state["samples"].append(np.asarray(res.theta, dtype=np.float64).copy())
        state["t"] = t + 1
        if checkpoint_path and checkpoint_every and state["t"] % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, _checkpoint_of(state), cfg)

    record = make_record()
    if record.samples.shape[0] != cfg.n_samples:
        raise AssertionError("retention arithmetic drifted from the configured count")
    if checkpoint_path:
        save_checkpoint(checkpoint_path, _checkpoint_of(state), cfg)
    return record


SAMPLERS = {
    "pbnn": pbnn_step,
    "vanilla": vanilla_step,
    "batched": batched_step,
    "tempered": tempered_step,
    "sgld": sgld_step,
}


# ---------------------------------------------------------------------------
# checkpoint serialization: one JSON header line, then float64 blocks
# ---------------------------------------------------------------------------


def save_checkpoint(path, ckpt: ChainCheckpoint, cfg: ChainConfig) -> None:
    dim = len(ckpt.theta)
    header = {
        "kind": "chain-checkpoint",
        "sampler": cfg.sampler,
        "seed": cfg.seed,
        "dim": dim,
        "completed": ckpt.completed,
        "accept_count": ckpt.accept_count,
        "cur_loss": ckpt.cur_loss,
        "n_samples": len(ckpt.samples),
        "rng_states": ckpt.rng_states,
        "dtype": "<f8",
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = np.concatenate(
        [
            np.asarray(ckpt.theta, dtype=np.float64),
            np.asarray(ckpt.samples, dtype=np.float64).reshape(-1),
            np.asarray(ckpt.step_rows, dtype=np.float64).reshape(-1),
        ]
    )
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob.astype("<f8").tobytes())


def load_checkpoint(path) -> ChainCheckpoint:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        blob = np.frombuffer(fh.read(), dtype="<f8")
    if header.get("kind") != "chain-checkpoint":
        raise ValueError("not a chain checkpoint file")
    dim = header["dim"]
    n_samples = header["n_samples"]
    completed = header["completed"]
    theta = blob[:dim].astype(np.float64)
    pos = dim
    samples = [
        blob[pos + i * dim : pos + (i + 1) * dim].astype(np.float64) for i in range(n_samples)
    ]
    pos += n_samples * dim
    rows = blob[pos : pos + completed * 4].reshape(completed, 4)
    rng_states = header["rng_states"]
    # JSON turns the big PCG64 integers into ints already; keys stay strings
    return ChainCheckpoint(
        completed=completed,
        theta=theta,
        cur_loss=header["cur_loss"],
        accept_count=header["accept_count"],
        samples=samples,
        step_rows=[tuple(r) for r in rows],
        rng_states=rng_states,
    )


# ---------------------------------------------------------------------------
# deterministic chain initialisation and step-size tuning
# ---------------------------------------------------------------------------


def fit_map(
    model,
    train: SupervisedDataset,
    prior: PriorSpec,
    n_iters: int = 2000,
    lr: float = 0.01,
    seed: int = 0,
    init_scale: float = 1.0,
) -> np.ndarray:
    """Deterministic Adam pre-optimisation of the full-data loss.

    Used to start every chain of a run near the same mode.
    """
    theta = model.init_params(stream(seed, "init"), scale=init_scale)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2, eps = 0.9, 0.999, 1e-8
    for it in range(1, n_iters + 1):
        g = grad_weighted_loss(model, theta, train, prior, None)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**it)
        v_hat = v / (1.0 - b2**it)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    if not np.all(np.isfinite(theta)):
        raise DivergedChainError("pre-optimisation diverged")
    return theta


def tune_step_size(
    model,
    cfg: ChainConfig,
    train: SupervisedDataset,
    theta0: np.ndarray,
    target: float = 0.25,
    rounds: int = 30,
    steps_per_round: int = 40,
    init_step: float | None = None,
) -> float:
    """Pre-run stochastic search for a proposal step hitting `target` acceptance.

    The tuning phase is discarded; only the step size survives.  For the
    penalised sampler the acceptance is structurally lower than any fixed
    target, so its step is tuned against the same chain with the penalty
    switched off (the `batched` rule) to keep the two comparable.
    """
    tune_sampler = "batched" if cfg.sampler == "pbnn" else cfg.sampler
    if tune_sampler == "sgld":
        return cfg.proposal.step
    step = init_step if init_step is not None else cfg.proposal.step
    rngs = _Streams(
        proposal=stream(cfg.seed, "tune", 0),
        batches=stream(cfg.seed, "tune", 1),
        accept=stream(cfg.seed, "tune", 2),
        noise=stream(cfg.seed, "tune", 3),
    )
    theta = np.asarray(theta0, dtype=np.float64).copy()
    step_fn = SAMPLERS[tune_sampler]
    uses_cache = tune_sampler in ("vanilla", "tempered")
    cur_loss = None
    for _ in range(rounds):
        wcfg = replace(cfg, sampler=tune_sampler, proposal=replace(cfg.proposal, step=step))
        acc = 0
        for _ in range(steps_per_round):
            if uses_cache:
                res = step_fn(model, theta, wcfg, train, rngs, cur_loss)
                cur_loss = res.cur_loss
            else:
                res = step_fn(model, theta, wcfg, train, rngs)
            theta = res.theta
            acc += res.accepted
        rate = acc / steps_per_round
        step *= math.exp(rate - target)
        cur_loss = None  # step changed; cached loss is still valid but cheap to refresh
    return step
