"""Resolved run configuration: defaults, JSON file, then CLI flag overrides.

The fully resolved configuration is hashed (canonical JSON, SHA-256, first
12 hex digits) and the hash is stamped into every report CSV so rows are
self-describing.  Invalid values raise ConfigError, which the CLI maps to
exit code 2.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .losses import MiniBatchPlan, PriorSpec
from .mdn import MdnArchitecture
from .pendulum import DEFAULT_LAGS, PendulumParams, PendulumState
from .samplers import SAMPLER_TAGS, ChainConfig, ProposalSpec


class ConfigError(ValueError):
    """Bad configuration value or malformed config file."""


DEFAULTS: dict = {
    "seed": 0,
    "out": "results",
    "workers": 1,
    "sampler": "pbnn",
    "data": {
        "path": "results/data/pendulum.csv",
        "n_obs": 9999,
        "n_train": 2992,
        "standardize": True,
        "lags": list(DEFAULT_LAGS),
        "dt": 1e-3,
        "record_every": 10,
        "m1": 1.0,
        "m2": 1.0,
        "l1": 1.0,
        "l2": 1.0,
        "g": 9.81,
        "phi1": 2.0,
        "phi2": 2.5,
        "omega1": 0.0,
        "omega2": 0.0,
    },
    "model": {"hidden": [10, 10]},
    "prior": {"lam": 1e-5},
    "chain": {"n_steps": 500_000, "burn_in": 200_000, "thin": 100},
    "plan": {"batch_size": 60, "num_batches": 100, "mode": "with-replacement"},
    "proposal": {"kind": "symmetric-gaussian", "step": None},
    "target_n": 60,
    "sgld": {"eta": 1e-5, "batch_size": 60},
    "pretrain": {"n_iters": 200, "lr": 0.01, "init_scale": 1.0},
    "tune": {"target": 0.25, "rounds": 30, "steps_per_round": 40, "init_step": 0.05},
    "benchmark": {"seeds": [0, 1, 2], "samplers": list(SAMPLER_TAGS), "bands_items": 200},
    "sweep": {"batch_sizes": [15, 30, 60, 120, 240]},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(config_path=None, overrides: dict | None = None) -> dict:
    """Resolve defaults <- file <- flag overrides and validate the result."""
    resolved = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        p = Path(config_path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            with open(p) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from None
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        resolved = _merge(resolved, user)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = resolved
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key: {dotted}")
        node[parts[-1]] = value
    validate_config(resolved)
    return resolved


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# typed views over the resolved dict
# ---------------------------------------------------------------------------


def build_pendulum(cfg: dict) -> tuple[PendulumParams, PendulumState]:
    d = cfg["data"]
    n_obs = int(d["n_obs"])
    if n_obs < 2:
        raise ConfigError("data.n_obs must be >= 2")
    record_every = int(d["record_every"])
    params = PendulumParams(
        m1=d["m1"],
        m2=d["m2"],
        l1=d["l1"],
        l2=d["l2"],
        g=d["g"],
        dt=d["dt"],
        n_steps=(n_obs - 1) * record_every,
        record_every=record_every,
    )
    state = PendulumState(d["phi1"], d["phi2"], d["omega1"], d["omega2"])
    return params, state


def build_arch(cfg: dict) -> MdnArchitecture:
    lags = cfg["data"]["lags"]
    return MdnArchitecture(
        input_dim=4 * len(lags), hidden=tuple(cfg["model"]["hidden"]), output_dim=4
    )


def build_prior(cfg: dict) -> PriorSpec:
    return PriorSpec(lam=float(cfg["prior"]["lam"]))


def build_plan(cfg: dict, batch_size: int | None = None) -> MiniBatchPlan:
    p = cfg["plan"]
    return MiniBatchPlan(
        batch_size=int(batch_size if batch_size is not None else p["batch_size"]),
        num_batches=int(p["num_batches"]),
        mode=p["mode"],
    )


def build_chain(
    cfg: dict,
    sampler: str,
    seed: int,
    step: float | None = None,
    batch_size: int | None = None,
) -> ChainConfig:
    ch = cfg["chain"]
    plan = build_plan(cfg, batch_size)
    prop_step = step if step is not None else cfg["proposal"]["step"]
    proposal = ProposalSpec(
        kind=cfg["proposal"]["kind"],
        step=float(prop_step) if prop_step is not None else 0.05,
    )
    target_n = cfg["target_n"]
    if sampler in ("pbnn", "batched"):
        # the batch is the data set at its own scale; tempered/sgld re-weight
        target_n = plan.batch_size
    return ChainConfig(
        sampler=sampler,
        n_steps=int(ch["n_steps"]),
        burn_in=int(ch["burn_in"]),
        thin=int(ch["thin"]),
        seed=int(seed),
        proposal=proposal,
        prior=build_prior(cfg),
        plan=plan,
        target_n=int(target_n) if target_n is not None else None,
        sgld_eta=float(cfg["sgld"]["eta"]),
        sgld_batch_size=int(cfg["sgld"]["batch_size"]),
    )


def validate_config(cfg: dict) -> None:
    """Instantiate every typed view once so bad values fail fast."""
    try:
        if cfg["sampler"] not in SAMPLER_TAGS:
            raise ValueError(f"sampler must be one of {SAMPLER_TAGS}")
        if int(cfg["workers"]) < 1:
            raise ValueError("workers must be >= 1")
        d = cfg["data"]
        if list(d["lags"]) != sorted(d["lags"]) or len(d["lags"]) == 0:
            raise ValueError("data.lags must be a non-empty ascending list")
        if int(d["n_train"]) < 1:
            raise ValueError("data.n_train must be >= 1")
        build_pendulum(cfg)
        build_arch(cfg)
        build_prior(cfg)
        build_plan(cfg)
        build_chain(cfg, cfg["sampler"], int(cfg["seed"]))
        t = cfg["tune"]
        if not 0 < float(t["target"]) < 1:
            raise ValueError("tune.target must be in (0, 1)")
        pt = cfg["pretrain"]
        if int(pt["n_iters"]) < 0 or not float(pt["lr"]) > 0:
            raise ValueError("pretrain needs n_iters >= 0 and lr > 0")
        b = cfg["benchmark"]
        if not b["seeds"]:
            raise ValueError("benchmark.seeds must not be empty")
        for s in b["samplers"]:
            if s not in SAMPLER_TAGS:
                raise ValueError(f"unknown benchmark sampler {s!r}")
        if not cfg["sweep"]["batch_sizes"]:
            raise ValueError("sweep.batch_sizes must not be empty")
        for n in cfg["sweep"]["batch_sizes"]:
            if int(n) < 1:
                raise ValueError("sweep batch sizes must be >= 1")
    except (ValueError, TypeError, KeyError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from None
