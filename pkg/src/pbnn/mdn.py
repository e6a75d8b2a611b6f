"""Small dense network emitting a heteroscedastic diagonal Gaussian.

The network maps an input window to 2*output_dim head values: the first
output_dim are the means, the rest are raw variance pre-activations passed
through a softplus,

    sigma^2_d = softplus(min(raw_d, RAW_MAX)) + VAR_MIN,

which keeps every variance inside [VAR_MIN, VAR_MAX].  Parameters live in a
single flat float64 vector (per layer: row-major weight matrix, then bias).
Gradients are written out by hand; no autodiff framework is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

VAR_MIN = 1e-6
VAR_MAX = 1e6
# softplus(x) == x to double precision for x this large, so clamping the raw
# pre-activation at VAR_MAX - VAR_MIN pins the variance ceiling at VAR_MAX.
RAW_MAX = VAR_MAX - VAR_MIN

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class MdnArchitecture:
    input_dim: int = 20
    hidden: tuple[int, ...] = (10, 10)
    output_dim: int = 4
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden, 2 * self.output_dim]

    @property
    def param_count(self) -> int:
        dims = self.layer_dims
        return sum((dims[i] + 1) * dims[i + 1] for i in range(len(dims) - 1))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "output_dim": self.output_dim,
            "activation": self.activation,
        }

    @staticmethod
    def from_dict(d: dict) -> "MdnArchitecture":
        return MdnArchitecture(
            input_dim=int(d["input_dim"]),
            hidden=tuple(int(h) for h in d["hidden"]),
            output_dim=int(d["output_dim"]),
            activation=d.get("activation", "tanh"),
        )


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus_inv(y: float) -> float:
    """Inverse of softplus for y > 0."""
    return float(np.log(np.expm1(y)))


def unpack(theta: np.ndarray, arch: MdnArchitecture) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat vector into per-layer (W, b) views."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (arch.param_count,):
        raise ValueError(f"expected {arch.param_count} parameters, got {theta.shape}")
    dims = arch.layer_dims
    layers = []
    pos = 0
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = theta[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = theta[pos : pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def pack(layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts)


def init_params(arch: MdnArchitecture, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Fan-in scaled Gaussian weights, zero biases.

    The raw-variance head biases are shifted so the freshly initialised
    network predicts sigma^2 close to 1.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    dims = arch.layer_dims
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        layers.append((w, b))
    layers[-1][1][arch.output_dim :] = softplus_inv(1.0 - VAR_MIN)
    return pack(layers)


def _forward_trace(theta: np.ndarray, arch: MdnArchitecture, x: np.ndarray):
    """Forward pass keeping the per-layer activations for backprop."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"expected inputs of width {arch.input_dim}, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    layers = unpack(theta, arch)
    hs = [x]
    h = x
    for w, b in layers[:-1]:
        h = np.tanh(h @ w + b)
        hs.append(h)
    w_out, b_out = layers[-1]
    z = h @ w_out + b_out
    mu = z[:, : arch.output_dim]
    raw = z[:, arch.output_dim :]
    raw_c = np.minimum(raw, RAW_MAX)
    var = softplus(raw_c) + VAR_MIN
    return layers, hs, mu, raw, raw_c, var, squeeze


def forward(theta: np.ndarray, arch: MdnArchitecture, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predict (mu, sigma^2); accepts one input row or a batch."""
    _, _, mu, _, _, var, squeeze = _forward_trace(theta, arch, x)
    if squeeze:
        return mu[0], var[0]
    return mu, var


def gaussian_loglik(y: np.ndarray, mu: np.ndarray, var: np.ndarray) -> np.ndarray:
    """Row-wise log density of a diagonal Gaussian."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    mu = np.atleast_2d(mu)
    var = np.atleast_2d(var)
    return -0.5 * np.sum(LOG_2PI + np.log(var) + (y - mu) ** 2 / var, axis=1)


def log_likelihood(theta: np.ndarray, arch: MdnArchitecture, x: np.ndarray, y: np.ndarray) -> float:
    mu, var = forward(theta, arch, np.atleast_2d(x))
    return float(gaussian_loglik(np.atleast_2d(y), mu, var)[0])


def nll_items(theta: np.ndarray, arch: MdnArchitecture, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-item negative log likelihood, shape (n,)."""
    _, _, mu, _, _, var, _ = _forward_trace(theta, arch, np.atleast_2d(x))
    return -gaussian_loglik(np.atleast_2d(y), mu, var)


def grad_nll_sum(
    theta: np.ndarray,
    arch: MdnArchitecture,
    x: np.ndarray,
    y: np.ndarray,
    weight: float = 1.0,
) -> np.ndarray:
    """Gradient of weight * sum_i( -log p(y_i | x_i, theta) ).

    Reverse-mode accumulation in dataset order:

        d/dmu_d     = (mu_d - y_d) / var_d
        d/dvar_d    = (var_d - (y_d - mu_d)^2) / (2 var_d^2)
        d/draw_d    = d/dvar_d * sigmoid(raw_d)      (0 beyond the clamp)

    then the usual tanh backprop through the hidden stack.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    layers, hs, mu, raw, raw_c, var, _ = _forward_trace(theta, arch, np.atleast_2d(x))
    resid = mu - y
    d_mu = resid / var
    d_var = (var - resid**2) / (2.0 * var**2)
    d_raw = d_var * expit(raw_c) * (raw < RAW_MAX)
    dz = weight * np.concatenate([d_mu, d_raw], axis=1)

    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads.append((hs[i].T @ dz, dz.sum(axis=0)))
        if i > 0:
            dz = (dz @ w.T) * (1.0 - hs[i] ** 2)
    grads.reverse()
    return pack(grads)


# ---------------------------------------------------------------------------
# flat parameter-vector file format
# ---------------------------------------------------------------------------


def save_params(path, theta: np.ndarray, arch: MdnArchitecture) -> None:
    """One-line JSON header, then the raw little-endian float64 vector."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (arch.param_count,):
        raise ValueError("parameter vector does not match the architecture")
    header = dict(arch.to_dict(), count=arch.param_count, dtype="<f8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(theta.astype("<f8").tobytes())


def load_params(path) -> tuple[np.ndarray, MdnArchitecture]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        blob = fh.read()
    arch = MdnArchitecture.from_dict(header)
    theta = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    if len(theta) != header["count"] or len(theta) != arch.param_count:
        raise ValueError("parameter payload does not match the header")
    return theta, arch


class MdnModel:
    """Binds an architecture to the functional API; samplers only see this."""

    def __init__(self, arch: MdnArchitecture | None = None):
        self.arch = arch or MdnArchitecture()

    @property
    def dim(self) -> int:
        return self.arch.param_count

    def init_params(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return init_params(self.arch, rng, scale)

    def forward(self, theta, x):
        return forward(theta, self.arch, x)

    def nll_items(self, theta, x, y) -> np.ndarray:
        return nll_items(theta, self.arch, x, y)

    def grad_nll_sum(self, theta, x, y, weight: float = 1.0) -> np.ndarray:
        return grad_nll_sum(theta, self.arch, x, y, weight)
