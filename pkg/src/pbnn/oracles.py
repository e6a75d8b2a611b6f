"""Closed-form references for the noisy accept/reject rule on a two-state toy.

For a proposed move whose true loss difference is Delta and whose estimated
difference is delta ~ N(Delta, sigma^2), the rule accepts with probability
min(1, exp(-delta - c)) where c = sigma^2/2 with the noise penalty enabled
and c = 0 without it.  Averaging over the noise gives

    A(Delta, sigma) = Phi((-Delta - c)/sigma)
                      + exp(-Delta - c + sigma^2/2) * Phi((Delta + c)/sigma - sigma),

which satisfies A(Delta) = exp(-Delta) * A(-Delta) exactly when the penalty
is on: the averaged chain then obeys detailed balance for pi ~ exp(-L).
Everything here is cheap and analytic so samplers can be validated against
an independent route (quadrature, eigen-solves, simulation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import log_ndtr, ndtr

from .rng import stream


@dataclass(frozen=True)
class TwoStateTarget:
    """Two states a, b with loss difference delta = L(b) - L(a); noise scale sigma."""

    delta: float = 1.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def expected_acceptance(delta: float, sigma: float, penalty: bool = True) -> float:
    """Noise-averaged acceptance probability of a move with true difference delta."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    c = 0.5 * sigma * sigma if penalty else 0.0
    if sigma == 0.0:
        return min(1.0, math.exp(min(0.0, -delta - c)))
    term1 = ndtr((-delta - c) / sigma)
    # second term in log space: exp can overflow long before the product does
    log_term2 = -delta - c + 0.5 * sigma * sigma + log_ndtr((delta + c) / sigma - sigma)
    return float(term1 + math.exp(log_term2))


def expected_acceptance_quadrature(delta: float, sigma: float, penalty: bool = True) -> float:
    """Same expectation by direct numerical integration (independent route)."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    c = 0.5 * sigma * sigma if penalty else 0.0
    if sigma == 0.0:
        return min(1.0, math.exp(min(0.0, -delta - c)))

    def pdf(d):
        z = (d - delta) / sigma
        return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))

    lo, _ = quad(pdf, -np.inf, -c, epsabs=1e-12, epsrel=1e-12, limit=200)
    hi, _ = quad(
        lambda d: math.exp(-d - c) * pdf(d), -c, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200
    )
    return lo + hi


def averaged_detailed_balance_residual(delta: float, sigma: float, penalty: bool = True) -> float:
    """| A(delta) - exp(-delta) * A(-delta) |, zero iff the averaged chain is exact."""
    fwd = expected_acceptance(delta, sigma, penalty)
    rev = expected_acceptance(-delta, sigma, penalty)
    return abs(fwd - math.exp(-delta) * rev)


def two_state_stationary(target: TwoStateTarget, penalty: bool = True) -> np.ndarray:
    """Stationary distribution (pi_a, pi_b) of the averaged two-state chain.

    The proposal always suggests the other state, so the chain is a 2x2
    kernel whose stationary point is proportional to the reverse rates.
    With the penalty on this equals (1, exp(-delta)) / (1 + exp(-delta)).
    """
    a_ab = expected_acceptance(target.delta, target.sigma, penalty)
    a_ba = expected_acceptance(-target.delta, target.sigma, penalty)
    pi = np.array([a_ba, a_ab], dtype=np.float64)
    return pi / pi.sum()


def simulate_two_state(
    target: TwoStateTarget, penalty: bool, n_steps: int, seed: int
) -> np.ndarray:
    """Empirical occupancy of the two-state chain under synthetic noisy estimates.

    Each step draws delta_hat ~ N(+-delta, sigma^2) for the proposed flip and
    applies the same log-space accept test as the samplers:
    accept iff log(u) < -delta_hat - c.
    """
    c = 0.5 * target.sigma * target.sigma if penalty else 0.0
    z = stream(seed, "noise").standard_normal(n_steps)
    log_u = np.log(stream(seed, "accept").random(n_steps))
    # precompute both conditional accept decisions for every step
    acc_from_a = log_u < (-target.delta - target.sigma * z - c)
    acc_from_b = log_u < (target.delta - target.sigma * z - c)
    state = 0
    visits_a = 0
    for t in range(n_steps):
        if state == 0:
            if acc_from_a[t]:
                state = 1
        else:
            if acc_from_b[t]:
                state = 0
        visits_a += state == 0
    frac_a = visits_a / n_steps
    return np.array([frac_a, 1.0 - frac_a])


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# ---------------------------------------------------------------------------
# grid checks used by the `validate` subcommand
# ---------------------------------------------------------------------------

GRID_DELTAS = (-3.0, -1.0, 0.0, 1.0, 3.0)
GRID_SIGMAS = (0.0, 0.5, 1.0, 2.0, 3.0)


def grid_checks(
    deltas: tuple[float, ...] = GRID_DELTAS, sigmas: tuple[float, ...] = GRID_SIGMAS
) -> list[dict]:
    """Run the analytic validation grid; returns one dict per check row."""
    rows = []

    def add(check, delta, sigma, value, threshold, passed):
        rows.append(
            {
                "check": check,
                "delta": delta,
                "sigma": sigma,
                "value": value,
                "threshold": threshold,
                "passed": bool(passed),
            }
        )

    for d in deltas:
        for s in sigmas:
            for penalty in (True, False):
                closed = expected_acceptance(d, s, penalty)
                numeric = expected_acceptance_quadrature(d, s, penalty)
                err = abs(closed - numeric)
                add(
                    f"closed_vs_quadrature_{'penalty' if penalty else 'plain'}",
                    d,
                    s,
                    err,
                    1e-8,
                    err < 1e-8,
                )
            pi = two_state_stationary(TwoStateTarget(d, s), penalty=True)
            ratio_err = abs(pi[1] / pi[0] - math.exp(-d))
            add("stationary_ratio_penalty", d, s, ratio_err, 1e-8, ratio_err < 1e-8)
            resid = averaged_detailed_balance_residual(d, s, penalty=True)
            add("detailed_balance_penalty", d, s, resid, 1e-8, resid < 1e-8)
    # without the penalty the averaged balance visibly breaks at this point
    resid_off = averaged_detailed_balance_residual(0.7, 1.3, penalty=False)
    add("detailed_balance_broken_without_penalty", 0.7, 1.3, resid_off, 0.05, resid_off > 0.05)
    return rows
