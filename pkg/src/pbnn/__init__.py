"""Exact MCMC for small Bayesian neural networks from noisy mini-batch losses.

The package bundles a double-pendulum data generator, a mixture-density
network with hand-written gradients, noise-penalised Metropolis-Hastings
samplers plus the usual baselines, closed-form validation oracles, and a
command line harness that writes deterministic CSV reports.
"""

__version__ = "0.1.0"
