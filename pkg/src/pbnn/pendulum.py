"""Frictionless double pendulum simulator and windowed forecasting dataset.

Angles are measured from the downward vertical.  With Delta = phi1 - phi2
and D = 2*m1 + m2 - m2*cos(2*Delta) the equations of motion are

    dphi1/dt   = omega1
    dphi2/dt   = omega2
    domega1/dt = (-g*(2*m1 + m2)*sin(phi1) - m2*g*sin(phi1 - 2*phi2)
                  - 2*sin(Delta)*m2*(omega2^2*l2 + omega1^2*l1*cos(Delta))) / (l1*D)
    domega2/dt = (2*sin(Delta)*(omega1^2*l1*(m1 + m2) + g*(m1 + m2)*cos(phi1)
                  + omega2^2*l2*m2*cos(Delta))) / (l2*D)

Observations are the Cartesian coordinates of both bobs,

    y = (l1*sin(phi1), -l1*cos(phi1),
         l1*sin(phi1) + l2*sin(phi2), -l1*cos(phi1) - l2*cos(phi2)),

recorded every `record_every`-th integration step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_LAGS = (20, 21, 22, 23, 24)


class IntegrationDivergedError(RuntimeError):
    """Raised when the integrator produces a non-finite state."""


class InsufficientDataError(ValueError):
    """Raised when a trajectory is too short for the requested lag window."""


@dataclass(frozen=True)
class PendulumParams:
    """Physical constants and integration grid for one trajectory."""

    m1: float = 1.0
    m2: float = 1.0
    l1: float = 1.0
    l2: float = 1.0
    g: float = 9.81
    dt: float = 1e-3
    n_steps: int = 99_980
    record_every: int = 10

    def __post_init__(self) -> None:
        for name in ("m1", "m2", "l1", "l2", "g", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_obs(self) -> int:
        """Number of retained observations, including the initial state."""
        return self.n_steps // self.record_every + 1


@dataclass(frozen=True)
class PendulumState:
    phi1: float = 2.0
    phi2: float = 2.5
    omega1: float = 0.0
    omega2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.phi1, self.phi2, self.omega1, self.omega2], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "PendulumState":
        return PendulumState(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


def _derivs(phi1, phi2, om1, om2, p: PendulumParams):
    delta = phi1 - phi2
    sd = math.sin(delta)
    cd = math.cos(delta)
    den = 2.0 * p.m1 + p.m2 - p.m2 * math.cos(2.0 * delta)
    a1 = (
        -p.g * (2.0 * p.m1 + p.m2) * math.sin(phi1)
        - p.m2 * p.g * math.sin(phi1 - 2.0 * phi2)
        - 2.0 * sd * p.m2 * (om2 * om2 * p.l2 + om1 * om1 * p.l1 * cd)
    ) / (p.l1 * den)
    a2 = (
        2.0
        * sd
        * (
            om1 * om1 * p.l1 * (p.m1 + p.m2)
            + p.g * (p.m1 + p.m2) * math.cos(phi1)
            + om2 * om2 * p.l2 * p.m2 * cd
        )
    ) / (p.l2 * den)
    return om1, om2, a1, a2


def _rk4(phi1, phi2, om1, om2, p: PendulumParams):
    dt = p.dt
    k1 = _derivs(phi1, phi2, om1, om2, p)
    k2 = _derivs(
        phi1 + 0.5 * dt * k1[0],
        phi2 + 0.5 * dt * k1[1],
        om1 + 0.5 * dt * k1[2],
        om2 + 0.5 * dt * k1[3],
        p,
    )
    k3 = _derivs(
        phi1 + 0.5 * dt * k2[0],
        phi2 + 0.5 * dt * k2[1],
        om1 + 0.5 * dt * k2[2],
        om2 + 0.5 * dt * k2[3],
        p,
    )
    k4 = _derivs(phi1 + dt * k3[0], phi2 + dt * k3[1], om1 + dt * k3[2], om2 + dt * k3[3], p)
    s = dt / 6.0
    return (
        phi1 + s * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        phi2 + s * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        om1 + s * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        om2 + s * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


def step_rk4(state: PendulumState, params: PendulumParams) -> PendulumState:
    """Advance one fixed step of size `params.dt` with classical RK4."""
    nxt = _rk4(state.phi1, state.phi2, state.omega1, state.omega2, params)
    if not all(math.isfinite(v) for v in nxt):
        raise IntegrationDivergedError(f"non-finite state after step: {nxt}")
    return PendulumState(*nxt)


def integrate_states(params: PendulumParams, initial: PendulumState, n_steps: int) -> np.ndarray:
    """Integrate `n_steps` steps and return all states, shape (n_steps + 1, 4)."""
    out = np.empty((n_steps + 1, 4), dtype=np.float64)
    phi1, phi2, om1, om2 = initial.phi1, initial.phi2, initial.omega1, initial.omega2
    out[0] = (phi1, phi2, om1, om2)
    for i in range(1, n_steps + 1):
        phi1, phi2, om1, om2 = _rk4(phi1, phi2, om1, om2, params)
        out[i] = (phi1, phi2, om1, om2)
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergedError("non-finite state during integration")
    return out


def observe(state: PendulumState, params: PendulumParams) -> np.ndarray:
    """Cartesian bob coordinates (x1, z1, x2, z2) of the current state."""
    x1 = params.l1 * math.sin(state.phi1)
    z1 = -params.l1 * math.cos(state.phi1)
    return np.array(
        [
            x1,
            z1,
            x1 + params.l2 * math.sin(state.phi2),
            z1 - params.l2 * math.cos(state.phi2),
        ],
        dtype=np.float64,
    )


def observe_states(states: np.ndarray, params: PendulumParams) -> np.ndarray:
    """Vectorised `observe` over a (n, 4) state array."""
    phi1 = states[:, 0]
    phi2 = states[:, 1]
    x1 = params.l1 * np.sin(phi1)
    z1 = -params.l1 * np.cos(phi1)
    return np.stack([x1, z1, x1 + params.l2 * np.sin(phi2), z1 - params.l2 * np.cos(phi2)], axis=1)


def energy(state: PendulumState, params: PendulumParams) -> float:
    """Total mechanical energy; conserved exactly by the continuous dynamics."""
    p = params
    c12 = math.cos(state.phi1 - state.phi2)
    kin = 0.5 * p.m1 * p.l1**2 * state.omega1**2 + 0.5 * p.m2 * (
        p.l1**2 * state.omega1**2
        + p.l2**2 * state.omega2**2
        + 2.0 * p.l1 * p.l2 * state.omega1 * state.omega2 * c12
    )
    pot = -(p.m1 + p.m2) * p.g * p.l1 * math.cos(state.phi1) - p.m2 * p.g * p.l2 * math.cos(
        state.phi2
    )
    return kin + pot


def simulate(params: PendulumParams, initial: PendulumState = PendulumState()) -> np.ndarray:
    """Integrate and return the retained observations, shape (n_obs, 4)."""
    states = integrate_states(params, initial, params.n_steps)
    return observe_states(states[:: params.record_every], params)


# ---------------------------------------------------------------------------
# windowed forecasting dataset
# ---------------------------------------------------------------------------


@dataclass
class SupervisedDataset:
    """Input windows `x` of shape (n, 4*len(lags)) and targets `y` of shape (n, 4)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 2 or len(self.x) != len(self.y):
            raise ValueError("x and y must be 2-d arrays with matching length")

    def __len__(self) -> int:
        return len(self.x)

    def subset(self, indices) -> "SupervisedDataset":
        return SupervisedDataset(self.x[indices], self.y[indices])


def build_dataset(observations: np.ndarray, lags: tuple[int, ...] = DEFAULT_LAGS) -> SupervisedDataset:
    """Window a trajectory into (x_t, y_t) pairs.

    For the default lags, x_t concatenates (y_{t-20}, ..., y_{t-24}) and the
    target is y_t, so a trajectory of T observations yields T - 24 items.
    """
    obs = np.asarray(observations, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[1] != 4:
        raise ValueError("observations must have shape (T, 4)")
    if len(lags) == 0 or any(l <= 0 for l in lags):
        raise ValueError("lags must be positive")
    max_lag = max(lags)
    n = len(obs) - max_lag
    if n < 1:
        raise InsufficientDataError(
            f"need more than {max_lag} observations, got {len(obs)}"
        )
    x = np.concatenate([obs[max_lag - l : max_lag - l + n] for l in lags], axis=1)
    y = obs[max_lag:]
    return SupervisedDataset(x, y)


def split_sequential(ds: SupervisedDataset, n_train: int) -> tuple[SupervisedDataset, SupervisedDataset]:
    """First `n_train` items for training, the remainder (in order) for test."""
    if not 0 < n_train < len(ds):
        raise ValueError(f"n_train must be in (0, {len(ds)}), got {n_train}")
    return ds.subset(slice(0, n_train)), ds.subset(slice(n_train, len(ds)))


@dataclass(frozen=True)
class Standardizer:
    """Per-coordinate affine transform fitted on the training targets.

    The same four constants are applied to the target and to every lag
    block of the input window, since both hold the same observables.
    """

    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(train: SupervisedDataset) -> "Standardizer":
        mean = train.y.mean(axis=0)
        std = train.y.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return Standardizer(mean, std)

    def apply(self, ds: SupervisedDataset) -> SupervisedDataset:
        blocks = ds.x.shape[1] // 4
        x = (ds.x - np.tile(self.mean, blocks)) / np.tile(self.std, blocks)
        y = (ds.y - self.mean) / self.std
        return SupervisedDataset(x, y)

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @staticmethod
    def from_dict(d: dict) -> "Standardizer":
        return Standardizer(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


# ---------------------------------------------------------------------------
# on-disk trajectory format: CSV (t, y1..y4) plus a JSON sidecar
# ---------------------------------------------------------------------------


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_trajectory(
    csv_path,
    observations: np.ndarray,
    params: PendulumParams,
    initial: PendulumState,
    seed: int,
    extra: dict | None = None,
) -> None:
    """Write observations as CSV rows `t,y1,y2,y3,y4` plus a JSON sidecar."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y1", "y2", "y3", "y4"])
        for t, row in enumerate(observations):
            w.writerow([t] + [repr(float(v)) for v in row])
    meta = {
        "params": {
            "m1": params.m1,
            "m2": params.m2,
            "l1": params.l1,
            "l2": params.l2,
            "g": params.g,
            "dt": params.dt,
            "n_steps": params.n_steps,
            "record_every": params.record_every,
        },
        "initial_state": {
            "phi1": initial.phi1,
            "phi2": initial.phi2,
            "omega1": initial.omega1,
            "omega2": initial.omega2,
        },
        "seed": int(seed),
    }
    if extra:
        meta.update(extra)
    with open(sidecar_path(csv_path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_trajectory(csv_path) -> tuple[np.ndarray, dict]:
    """Read back a trajectory CSV and its sidecar metadata."""
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["t", "y1", "y2", "y3", "y4"]:
            raise ValueError(f"unexpected trajectory header: {header}")
        rows = [[float(v) for v in row[1:]] for row in r]
    obs = np.asarray(rows, dtype=np.float64)
    meta_file = sidecar_path(csv_path)
    meta = {}
    if meta_file.exists():
        with open(meta_file) as fh:
            meta = json.load(fh)
    return obs, meta
