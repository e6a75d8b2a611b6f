"""Drivers behind the CLI subcommands: data generation, runs, benchmark, sweep.

Everything here is deterministic given the resolved configuration: chain
jobs are keyed by (sampler, seed), results are written in configuration
order regardless of which worker finished first, and floats are serialized
with `repr` so reruns produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics, oracles, pendulum
from .config import (
    ConfigError,
    build_arch,
    build_chain,
    build_pendulum,
    build_prior,
    config_hash,
)
from .mdn import MdnModel, save_params
from .samplers import ChainConfig, fit_map, run_chain, tune_step_size

BANDS_COLUMNS = ("model", "dim", "t", "y_true", "mu_star", "sigma_star", "config_hash")
SWEEP_COLUMNS = (
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
VALIDATE_COLUMNS = ("check", "delta", "sigma", "value", "threshold", "passed", "config_hash")
BENCHMARK_COLUMNS = (
    "sampler",
    "N",
    "M",
    "seeds",
    "test_avg_nll_mean",
    "test_avg_nll_std",
    "train_avg_nll_mean",
    "train_avg_nll_std",
    "test_coverage_mean",
    "test_ace_mean",
    "test_ace_std",
    "acceptance_rate_mean",
    "J",
    "config_hash",
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_step_log(path, record) -> Path:
    rows = []
    for i, (delta, chi2, accepted, lqr) in enumerate(record.step_log):
        rows.append([i, repr(float(delta)), repr(float(chi2)), int(accepted), repr(float(lqr))])
    return write_csv(path, ("step", "delta", "chi2", "accepted", "log_q_ratio"), rows)


# ---------------------------------------------------------------------------
# data pipeline
# ---------------------------------------------------------------------------


def generate_data(cfg: dict) -> dict:
    """Simulate the trajectory and write the dataset CSV plus its sidecar."""
    params, initial = build_pendulum(cfg)
    obs = pendulum.simulate(params, initial)
    lags = tuple(int(l) for l in cfg["data"]["lags"])
    ds = pendulum.build_dataset(obs, lags)
    n_train = int(cfg["data"]["n_train"])
    train, _ = pendulum.split_sequential(ds, n_train)
    scaler = pendulum.Standardizer.fit(train)
    path = Path(cfg["data"]["path"])
    pendulum.write_trajectory(
        path,
        obs,
        params,
        initial,
        seed=int(cfg["seed"]),
        extra={
            "lags": list(lags),
            "n_train": n_train,
            "n_items": len(ds),
            "standardize": bool(cfg["data"]["standardize"]),
            "standardizer": scaler.to_dict(),
            "config_hash": config_hash(cfg),
        },
    )
    return {"csv": path, "sidecar": pendulum.sidecar_path(path), "n_obs": len(obs), "n_items": len(ds)}


def load_datasets(cfg: dict) -> tuple[pendulum.SupervisedDataset, pendulum.SupervisedDataset, MdnModel]:
    """Load the dataset file, window, split, and optionally standardize."""
    path = Path(cfg["data"]["path"])
    if not path.exists():
        raise ConfigError(f"dataset not found: {path} (run generate-data first)")
    obs, meta = pendulum.read_trajectory(path)
    lags = tuple(int(l) for l in meta.get("lags", cfg["data"]["lags"]))
    n_train = int(meta.get("n_train", cfg["data"]["n_train"]))
    ds = pendulum.build_dataset(obs, lags)
    train, test = pendulum.split_sequential(ds, n_train)
    if cfg["data"]["standardize"]:
        if "standardizer" in meta:
            scaler = pendulum.Standardizer.from_dict(meta["standardizer"])
        else:
            scaler = pendulum.Standardizer.fit(train)
        train, test = scaler.apply(train), scaler.apply(test)
    model = MdnModel(build_arch(cfg))
    if model.arch.input_dim != train.x.shape[1]:
        raise ConfigError(
            f"model input width {model.arch.input_dim} does not match data width {train.x.shape[1]}"
        )
    return train, test, model


# ---------------------------------------------------------------------------
# single chain job (also the unit of parallelism for the benchmark)
# ---------------------------------------------------------------------------


def _report_dims(chain_cfg: ChainConfig, train_size: int) -> tuple[int, int]:
    """(N, M) as reported in CSV rows for a given sampler configuration."""
    if chain_cfg.sampler in ("pbnn", "batched"):
        return chain_cfg.plan.batch_size, chain_cfg.plan.num_batches
    if chain_cfg.sampler == "vanilla":
        return train_size, 0
    return chain_cfg.target_n or train_size, 0


def _chain_job(payload: dict) -> dict:
    """Run one chain and evaluate it; shaped for ProcessPoolExecutor."""
    train = pendulum.SupervisedDataset(payload["train_x"], payload["train_y"])
    test = pendulum.SupervisedDataset(payload["test_x"], payload["test_y"])
    model = MdnModel(build_arch(payload["cfg"]))
    chain_cfg: ChainConfig = payload["chain_cfg"]
    record = run_chain(
        model,
        chain_cfg,
        train,
        payload["theta0"],
        checkpoint_path=payload.get("checkpoint_path"),
    )
    n, m = _report_dims(chain_cfg, len(train))
    common = dict(
        sampler=chain_cfg.sampler,
        n=n,
        m=m,
        acceptance_rate=record.acceptance_rate,
        seed=chain_cfg.seed,
        config_hash=payload["hash"],
    )
    reports = [
        metrics.evaluate_split(model, record.samples, train, split="train", **common),
        metrics.evaluate_split(model, record.samples, test, split="test", **common),
    ]
    out = {"sampler": chain_cfg.sampler, "seed": chain_cfg.seed, "record": record, "reports": reports}
    if payload.get("bands_items"):
        k = min(int(payload["bands_items"]), len(test))
        extract = test.subset(slice(0, k))
        pm = metrics.predictive_moments(model, record.samples, extract.x)
        out["bands"] = {"y": extract.y, "mu": pm.mu, "sigma": pm.sigma}
    return out


def _run_jobs(payloads: list[dict], workers: int) -> list[dict]:
    if workers <= 1 or len(payloads) <= 1:
        return [_chain_job(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chain_job, payloads))


def _tuned_steps(cfg, model, train, theta0, seed, samplers) -> dict:
    """Fixed proposal step per sampler; the penalised chain shares the
    no-penalty chain's step so the pair stays comparable."""
    t = cfg["tune"]
    fixed = cfg["proposal"]["step"]
    steps: dict[str, float | None] = {}
    batched_step_size: float | None = None
    for sampler in samplers:
        if sampler == "sgld":
            steps[sampler] = None
            continue
        if fixed is not None:
            steps[sampler] = float(fixed)
            continue
        tune_as = "batched" if sampler == "pbnn" else sampler
        if tune_as == "batched" and batched_step_size is not None:
            steps[sampler] = batched_step_size
            continue
        chain_cfg = build_chain(cfg, tune_as, seed, step=float(t["init_step"]))
        tuned = tune_step_size(
            model,
            chain_cfg,
            train,
            theta0,
            target=float(t["target"]),
            rounds=int(t["rounds"]),
            steps_per_round=int(t["steps_per_round"]),
        )
        steps[sampler] = tuned
        if tune_as == "batched":
            batched_step_size = tuned
    return steps


def _prepare_payload(cfg, train, test, chain_cfg, theta0, bands_items=0, tag=None) -> dict:
    tag = tag or f"{chain_cfg.sampler}_s{chain_cfg.seed}"
    return {
        "cfg": cfg,
        "chain_cfg": chain_cfg,
        "theta0": theta0,
        "train_x": train.x,
        "train_y": train.y,
        "test_x": test.x,
        "test_y": test.y,
        "hash": config_hash(cfg),
        "bands_items": bands_items,
        "checkpoint_path": Path(cfg["out"]) / "chains" / f"{tag}.ckpt",
    }


def _save_chain_outputs(out_dir: Path, result) -> None:
    tag = f"{result['sampler']}_s{result['seed']}"
    write_step_log(out_dir / "steps" / f"{tag}.csv", result["record"])


# ---------------------------------------------------------------------------
# subcommand drivers
# ---------------------------------------------------------------------------


def run_single(cfg: dict) -> dict:
    """Run the configured sampler once and write reports/chain artifacts."""
    train, test, model = load_datasets(cfg)
    out_dir = Path(cfg["out"])
    seed = int(cfg["seed"])
    sampler = cfg["sampler"]
    prior = build_prior(cfg)
    pt = cfg["pretrain"]
    theta0 = fit_map(
        model,
        train,
        prior,
        n_iters=int(pt["n_iters"]),
        lr=float(pt["lr"]),
        seed=seed,
        init_scale=float(pt["init_scale"]),
    )
    steps = _tuned_steps(cfg, model, train, theta0, seed, [sampler])
    chain_cfg = build_chain(cfg, sampler, seed, step=steps[sampler])
    result = _chain_job(_prepare_payload(cfg, train, test, chain_cfg, theta0))
    save_params(out_dir / "theta0.params", theta0, model.arch)
    _save_chain_outputs(out_dir, result)
    reports_path = write_csv(
        out_dir / "runs.csv", metrics.REPORT_COLUMNS, [r.row() for r in result["reports"]]
    )
    meta = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "tuned_step": steps[sampler],
        "acceptance_rate": result["record"].acceptance_rate,
    }
    with open(out_dir / "run_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"reports": result["reports"], "runs_csv": reports_path, "record": result["record"]}


def run_benchmark(cfg: dict) -> dict:
    """All requested samplers x seeds, shared theta0 per seed, aggregate table."""
    train, test, model = load_datasets(cfg)
    out_dir = Path(cfg["out"])
    chash = config_hash(cfg)
    prior = build_prior(cfg)
    pt = cfg["pretrain"]
    samplers = list(cfg["benchmark"]["samplers"])
    seeds = [int(s) for s in cfg["benchmark"]["seeds"]]
    bands_items = int(cfg["benchmark"]["bands_items"])

    payloads = []
    for seed in seeds:
        theta0 = fit_map(
            model,
            train,
            prior,
            n_iters=int(pt["n_iters"]),
            lr=float(pt["lr"]),
            seed=seed,
            init_scale=float(pt["init_scale"]),
        )
        steps = _tuned_steps(cfg, model, train, theta0, seed, samplers)
        for sampler in samplers:
            chain_cfg = build_chain(cfg, sampler, seed, step=steps[sampler])
            wants_bands = sampler != "vanilla" and seed == seeds[0]
            payloads.append(
                _prepare_payload(
                    cfg, train, test, chain_cfg, theta0, bands_items if wants_bands else 0
                )
            )

    results = _run_jobs(payloads, int(cfg["workers"]))
    by_key = {(r["sampler"], r["seed"]): r for r in results}

    run_rows = []
    bands_rows = []
    agg_rows = []
    first_test_t = int(max(tuple(cfg["data"]["lags"]))) + int(cfg["data"]["n_train"])
    for sampler in samplers:
        per_seed = [by_key[(sampler, seed)] for seed in seeds]
        for res in per_seed:
            _save_chain_outputs(out_dir, res)
            run_rows.extend(r.row() for r in res["reports"])
            if "bands" in res:
                b = res["bands"]
                for d in range(b["y"].shape[1]):
                    for i in range(len(b["y"])):
                        bands_rows.append(
                            [
                                sampler,
                                d,
                                first_test_t + i,
                                repr(float(b["y"][i, d])),
                                repr(float(b["mu"][i, d])),
                                repr(float(b["sigma"][i, d])),
                                chash,
                            ]
                        )
        test_reports = [r for res in per_seed for r in res["reports"] if r.split == "test"]
        train_reports = [r for res in per_seed for r in res["reports"] if r.split == "train"]
        n, m = test_reports[0].n, test_reports[0].m

        def _mean(vals):
            return float(np.mean(vals))

        def _std(vals):
            return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

        test_nll = [r.avg_nll for r in test_reports]
        train_nll = [r.avg_nll for r in train_reports]
        aces = [r.ace for r in test_reports]
        agg_rows.append(
            [
                sampler,
                n,
                m,
                len(seeds),
                repr(_mean(test_nll)),
                repr(_std(test_nll)),
                repr(_mean(train_nll)),
                repr(_std(train_nll)),
                repr(_mean([r.coverage for r in test_reports])),
                repr(_mean(aces)),
                repr(_std(aces)),
                repr(_mean([r.acceptance_rate for r in test_reports])),
                test_reports[0].j,
                chash,
            ]
        )

    runs_csv = write_csv(out_dir / "runs.csv", metrics.REPORT_COLUMNS, run_rows)
    benchmark_csv = write_csv(out_dir / "benchmark.csv", BENCHMARK_COLUMNS, agg_rows)
    bands_csv = write_csv(out_dir / "bands.csv", BANDS_COLUMNS, bands_rows)
    return {"runs_csv": runs_csv, "benchmark_csv": benchmark_csv, "bands_csv": bands_csv}


def run_sweep(cfg: dict) -> dict:
    """PBNN across batch sizes with one shared proposal step and theta0."""
    train, test, model = load_datasets(cfg)
    out_dir = Path(cfg["out"])
    chash = config_hash(cfg)
    prior = build_prior(cfg)
    pt = cfg["pretrain"]
    seed = int(cfg["seed"])
    theta0 = fit_map(
        model,
        train,
        prior,
        n_iters=int(pt["n_iters"]),
        lr=float(pt["lr"]),
        seed=seed,
        init_scale=float(pt["init_scale"]),
    )
    steps = _tuned_steps(cfg, model, train, theta0, seed, ["pbnn"])
    payloads = []
    batch_sizes = [int(n) for n in cfg["sweep"]["batch_sizes"]]
    for n in batch_sizes:
        chain_cfg = build_chain(cfg, "pbnn", seed, step=steps["pbnn"], batch_size=n)
        payloads.append(
            _prepare_payload(cfg, train, test, chain_cfg, theta0, tag=f"pbnn_n{n}_s{seed}")
        )
    results = _run_jobs(payloads, int(cfg["workers"]))
    rows = []
    for n, res in zip(batch_sizes, results):
        test_report = next(r for r in res["reports"] if r.split == "test")
        rate = res["record"].acceptance_rate
        log10_rate = math.log10(rate) if rate > 0 else float("-inf")
        rows.append(
            [
                n,
                test_report.m,
                repr(test_report.avg_nll),
                repr(log10_rate),
                repr(test_report.coverage),
                repr(test_report.ace),
                repr(rate),
                test_report.j,
                seed,
                chash,
            ]
        )
    sweep_csv = write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, rows)
    return {"sweep_csv": sweep_csv, "rows": rows}


def run_validate(cfg: dict) -> dict:
    """Analytic grid checks; all rows must pass for a zero exit."""
    chash = config_hash(cfg)
    rows = oracles.grid_checks()
    csv_rows = [
        [
            r["check"],
            repr(float(r["delta"])),
            repr(float(r["sigma"])),
            repr(float(r["value"])),
            repr(float(r["threshold"])),
            int(r["passed"]),
            chash,
        ]
        for r in rows
    ]
    out_dir = Path(cfg["out"])
    path = write_csv(out_dir / "validate.csv", VALIDATE_COLUMNS, csv_rows)
    ok = all(r["passed"] for r in rows)
    return {"validate_csv": path, "rows": csv_rows, "ok": ok}
