"""Experiment harness: JSON configs, multi-seed runs, traces, dumps, sweeps.

A config is a single JSON object with flat dotted keys (``"penalty.rho"``).
Every key has a default except ``benchmark`` and ``strategy``; unknown keys
are rejected with the offending key and, when the config came from a file,
the line it appears on.

Outputs per experiment: one trace CSV per seed, one aggregate CSV
(per-iteration mean and standard error of simple regret), one manifest JSON
recording every effective parameter (including auto-resolved lambda and rho),
and one checkpoint JSON per model-based seed so latent dumps can be produced
later without rerunning.

Seeds execute concurrently; every file is seed-private and written
single-threaded after all runs finish, so reruns of the same config are
bit-reproducible.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acquisition as acq
from . import benchmarks
from . import collision as col
from . import driver
from . import gp
from .autodiff import ParamStore


class ConfigError(ValueError):
    """Invalid experiment configuration; carries the key and file line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line

    def __str__(self) -> str:  # "line 12, key penalty.rho: ..." when known
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.key is not None:
            where.append(f"key {self.key}")
        prefix = ", ".join(where)
        base = super().__str__()
        return f"{prefix}: {base}" if prefix else base


class ExperimentError(RuntimeError):
    """A run, dump, or sweep failed after the config validated."""


TRACE_HEADER = "seed,iter,pool_id,y,best_y,simple_regret,collision_metric,nll,mse,beta,ms"
AGGREGATE_HEADER = "iter,mean_simple_regret,se_simple_regret"

REQUIRED_KEYS = ("benchmark", "strategy")

DEFAULTS: dict[str, object] = {
    "pool.size": 2000,
    "pool.seed": 0,
    "pool.dim": None,
    "seeds": [0, 1, 2, 3, 4, 5, 6, 7],
    "budget": 200,
    "n_init": "auto",
    "noise_sd": "auto",
    "out": "runs",
    "timing": False,
    "retrain.interval": 50,
    "retrain.epochs": 100,
    "retrain.lr": 1e-2,
    "warmstart.epochs": 100,
    "encoder.hidden": [1000, 500, 50],
    "encoder.latent_dim": 1,
    "encoder.negative_slope": 0.01,
    "pretrain.epochs": 200,
    "pretrain.lr": 1e-2,
    "penalty.lambda": "auto",
    "penalty.rho": "auto",
    "penalty.zeta": 1.0,
    "beta.kind": "constant",
    "beta.constant": 4.0,
    "beta.delta": 0.05,
    "beta.dim": 1,
    "beta.radius": 1.0,
    "beta.lipschitz": 1.0,
    "beta.pi2_correction": False,
    "gp.log_signal_var": 0.0,
    "gp.log_lengthscale": 0.0,
    "gp.log_noise_var": math.log(1e-2),
}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_key(key: str, v) -> None:
    """Domain check for one resolved config value; raises ConfigError."""

    def bad(expected: str):
        raise ConfigError(f"expected {expected}, got {v!r}", key=key)

    if key == "benchmark":
        if v not in benchmarks.benchmark_names():
            bad(f"one of {benchmarks.benchmark_names()}")
    elif key == "strategy":
        if v not in driver.STRATEGIES:
            bad(f"one of {list(driver.STRATEGIES)}")
    elif key == "pool.size":
        if not (_is_int(v) and v >= 2):
            bad("an integer >= 2")
    elif key == "pool.seed":
        if not (_is_int(v) and v >= 0):
            bad("an integer >= 0")
    elif key == "pool.dim":
        if v is not None and not (_is_int(v) and v >= 1):
            bad("null or an integer >= 1")
    elif key == "seeds":
        if not (isinstance(v, list) and len(v) >= 2 and all(_is_int(s) for s in v)):
            bad("a list of >= 2 integers (standard errors need >= 2 seeds)")
        if len(set(v)) != len(v):
            bad("distinct seeds")
    elif key == "budget":
        if not (_is_int(v) and v >= 1):
            bad("an integer >= 1")
    elif key in ("n_init",):
        if v != "auto" and not (_is_int(v) and v >= 0):
            bad("'auto' or an integer >= 0")
    elif key == "noise_sd":
        if v != "auto" and not (_is_number(v) and math.isfinite(v) and v >= 0):
            bad("'auto' or a number >= 0")
    elif key == "out":
        if not (isinstance(v, str) and v):
            bad("a non-empty string")
    elif key in ("timing", "beta.pi2_correction"):
        if not isinstance(v, bool):
            bad("true or false")
    elif key in ("retrain.interval", "beta.dim", "encoder.latent_dim"):
        if not (_is_int(v) and v >= 1):
            bad("an integer >= 1")
    elif key in ("retrain.epochs", "warmstart.epochs", "pretrain.epochs"):
        if not (_is_int(v) and v >= 0):
            bad("an integer >= 0")
    elif key in ("retrain.lr", "pretrain.lr", "encoder.negative_slope",
                 "beta.radius", "beta.lipschitz"):
        if not (_is_number(v) and math.isfinite(v) and v > 0):
            bad("a positive number")
    elif key == "encoder.hidden":
        if not (isinstance(v, list) and v and all(_is_int(h) and h >= 1 for h in v)):
            bad("a non-empty list of integers >= 1")
    elif key == "penalty.lambda":
        if v != "auto" and not (_is_number(v) and math.isfinite(v) and v > 0):
            bad("'auto' or a positive number")
    elif key == "penalty.rho":
        if v != "auto" and not (_is_number(v) and math.isfinite(v) and v >= 0):
            bad("'auto' or a number >= 0")
    elif key == "penalty.zeta":
        if not (_is_number(v) and math.isfinite(v)):
            bad("a finite number")
    elif key == "beta.kind":
        if v not in ("constant", "discrete", "continuous"):
            bad("one of ['constant', 'discrete', 'continuous']")
    elif key == "beta.constant":
        if not (_is_number(v) and math.isfinite(v) and v >= 0):
            bad("a number >= 0")
    elif key == "beta.delta":
        if not (_is_number(v) and 0 < v < 1):
            bad("a number in (0, 1)")
    elif key in ("gp.log_signal_var", "gp.log_lengthscale", "gp.log_noise_var"):
        if not (_is_number(v) and math.isfinite(v)):
            bad("a finite number")
    else:  # pragma: no cover - reachable only if DEFAULTS grows unchecked
        raise ConfigError(f"no validator for key {key!r}", key=key)


def _key_line(source_text: str | None, key: str) -> int | None:
    """Best-effort line number of a dotted key in the raw config text."""
    if source_text is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(source_text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def parse_override(item: str) -> tuple[str, object]:
    """Split one ``key=value`` override; values parse as JSON, else string."""
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override has an empty key: {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def resolve_config(
    doc: dict, overrides=(), source_text: str | None = None
) -> dict:
    """Merge defaults <- document <- overrides, then validate every key."""
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a JSON object, got {type(doc).__name__}")
    known = set(DEFAULTS) | set(REQUIRED_KEYS)
    cfg: dict[str, object] = dict(DEFAULTS)
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(
                f"unknown key {key!r}; known keys: {sorted(known)}",
                key=key, line=_key_line(source_text, key),
            )
        cfg[key] = value
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        if key not in known:
            raise ConfigError(f"unknown override key {key!r}", key=key)
        cfg[key] = value
    for key in REQUIRED_KEYS:
        if key not in cfg:
            raise ConfigError(f"missing required key {key!r}", key=key)
    for key in sorted(cfg):
        try:
            _check_key(key, cfg[key])
        except ConfigError as err:
            if err.line is None:
                err.line = _key_line(source_text, err.key or key)
            raise
    return cfg


def load_config(path, overrides=()) -> dict:
    """Read, merge, and validate a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path!s}: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err.msg}", line=err.lineno) from err
    return resolve_config(doc, overrides, source_text=text)


def build_pool(cfg: dict) -> benchmarks.BenchmarkInstance:
    return benchmarks.make_pool(
        cfg["benchmark"], cfg["pool.size"], seed=cfg["pool.seed"], dim=cfg["pool.dim"]
    )


def build_run_config(cfg: dict, seed: int) -> driver.RunConfig:
    penalty = col.PenaltyConfig(
        lam=cfg["penalty.lambda"], rho=cfg["penalty.rho"], zeta=cfg["penalty.zeta"]
    )
    schedule = acq.BetaSchedule(
        kind=cfg["beta.kind"],
        constant=cfg["beta.constant"],
        pool_size=cfg["pool.size"],
        delta=cfg["beta.delta"],
        dim=cfg["beta.dim"],
        radius=cfg["beta.radius"],
        lipschitz=cfg["beta.lipschitz"],
        pi2_correction=cfg["beta.pi2_correction"],
    )
    return driver.RunConfig(
        strategy=cfg["strategy"],
        budget=cfg["budget"],
        retrain_interval=cfg["retrain.interval"],
        retrain_epochs=cfg["retrain.epochs"],
        lr=cfg["retrain.lr"],
        penalty=penalty,
        schedule=schedule,
        seed=seed,
        noise_sd=cfg["noise_sd"],
        hidden=tuple(cfg["encoder.hidden"]),
        latent_dim=cfg["encoder.latent_dim"],
        negative_slope=cfg["encoder.negative_slope"],
        pretrain_epochs=cfg["pretrain.epochs"],
        pretrain_lr=cfg["pretrain.lr"],
        n_init=cfg["n_init"],
        warmstart_epochs=cfg["warmstart.epochs"],
        init_log_signal_var=cfg["gp.log_signal_var"],
        init_log_lengthscale=cfg["gp.log_lengthscale"],
        init_log_noise_var=cfg["gp.log_noise_var"],
        timing=cfg["timing"],
    )


# ---------------------------------------------------------------------------
# trace / aggregate files


def _fmt(v) -> str:
    """Bit-stable float formatting: repr of the Python float ('nan' for NaN)."""
    return repr(float(v))


def write_trace(path, rows: list[driver.TraceRow]) -> None:
    lines = [TRACE_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(int(r.seed)), str(int(r.t)), str(int(r.pool_id)),
                    _fmt(r.y), _fmt(r.best_y), _fmt(r.simple_regret),
                    _fmt(r.collision), _fmt(r.nll), _fmt(r.mse),
                    _fmt(r.beta), _fmt(r.ms),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_trace(path) -> list[driver.TraceRow]:
    """Parse one trace CSV back into rows (cumulative regret is not stored)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ExperimentError(
            f"{path!s} is not a trace CSV (header {lines[0] if lines else ''!r})"
        )
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 11:
            raise ExperimentError(f"{path!s}: malformed row {line!r}")
        rows.append(
            driver.TraceRow(
                seed=int(parts[0]), t=int(parts[1]), pool_id=int(parts[2]),
                y=float(parts[3]), best_y=float(parts[4]),
                simple_regret=float(parts[5]), cum_regret=float("nan"),
                collision=float(parts[6]), nll=float(parts[7]),
                mse=float(parts[8]), beta=float(parts[9]), ms=float(parts[10]),
            )
        )
    return rows


def write_aggregate(path, mean: np.ndarray, se: np.ndarray) -> None:
    lines = [AGGREGATE_HEADER]
    for t, (m, s) in enumerate(zip(mean, se), start=1):
        lines.append(f"{t},{_fmt(m)},{_fmt(s)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_aggregate(path) -> tuple[np.ndarray, np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != AGGREGATE_HEADER:
        raise ExperimentError(f"{path!s} is not an aggregate CSV")
    mean, se = [], []
    for expected_t, line in enumerate(lines[1:], start=1):
        t, m, s = line.split(",")
        if int(t) != expected_t:
            raise ExperimentError(f"{path!s}: iterations out of order at {line!r}")
        mean.append(float(m))
        se.append(float(s))
    return np.array(mean), np.array(se)


def aggregate(seed_rows: list[list[driver.TraceRow]]) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of simple regret per iteration across seeds."""
    return driver.regret_summary(seed_rows)


# ---------------------------------------------------------------------------
# output layout and manifests


def _jsonable(v):
    """Recursively convert to strict-JSON values (NaN/inf become null)."""
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def fresh_dir(root, name: str) -> Path:
    """Create ``root/name`` without clobbering: suffix -1, -2, ... if taken."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    candidate = root / name
    k = 0
    while True:
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            k += 1
            candidate = root / f"{name}-{k}"


def _run_dir_name(cfg: dict) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    return f"{cfg['benchmark']}-{cfg['strategy']}-{stamp}"


def _checkpoint_payload(
    cfg: dict, seed: int, bench: benchmarks.BenchmarkInstance, res: driver.RunResult
) -> dict:
    hyper = res.model.hyper()
    encoder_block = None
    if res.model.spec is not None:
        spec = res.model.spec
        encoder_block = {
            "input_dim": spec.input_dim,
            "hidden": list(spec.hidden),
            "latent_dim": spec.latent_dim,
            "negative_slope": spec.negative_slope,
            "params": {
                name: {"shape": list(t.value.shape), "values": t.value.reshape(-1).tolist()}
                for name, t in res.model.store.items()
                if not name.startswith("gp.")
            },
        }
    return {
        "format": "latentbo-checkpoint",
        "version": 1,
        "benchmark": cfg["benchmark"],
        "pool": {"size": cfg["pool.size"], "seed": cfg["pool.seed"], "dim": cfg["pool.dim"]},
        "strategy": cfg["strategy"],
        "seed": seed,
        "budget": cfg["budget"],
        "final_beta": res.rows[-1].beta,
        "noise_sd": res.noise_sd,
        "lambda": res.resolved["lam"],
        "rho": res.resolved["rho"],
        "zeta": res.resolved["zeta"],
        "init_ids": res.init_ids,
        "obs_ids": res.obs_ids,
        "obs_y": [float(v) for v in res.obs_y],
        "encoder": encoder_block,
        "gp": {
            "log_signal_var": hyper.log_signal_var,
            "log_lengthscale": hyper.log_lengthscale,
            "log_noise_var": hyper.log_noise_var,
        },
    }


@dataclass
class ExperimentResult:
    """Paths and in-memory results of one multi-seed experiment."""

    out_dir: Path
    trace_paths: dict[int, Path]
    checkpoint_paths: dict[int, Path]
    aggregate_path: Path
    manifest_path: Path
    manifest: dict
    results: dict[int, driver.RunResult]
    failures: dict[int, str] = field(default_factory=dict)


def _resolve_source(config, overrides) -> dict:
    if isinstance(config, dict):
        return resolve_config(config, overrides)
    return load_config(config, overrides)


def run_experiment(
    config, *, seeds=None, out=None, overrides=(), dir_name: str | None = None
) -> ExperimentResult:
    """Run every seed of a config and emit traces, aggregate, and manifest.

    ``config`` is a path to a JSON file or an already-parsed document.
    ``seeds``/``out`` override the config's seed list and output root.
    Seeds run concurrently; all files are written afterwards in seed order.
    """
    started = time.perf_counter()
    cfg = _resolve_source(config, overrides)
    if seeds is not None:
        cfg = dict(cfg)
        cfg["seeds"] = [int(s) for s in seeds]
        _check_key("seeds", cfg["seeds"])
    if out is not None:
        cfg = dict(cfg)
        cfg["out"] = str(out)
        _check_key("out", cfg["out"])

    bench = build_pool(cfg)
    run_configs = {seed: build_run_config(cfg, seed) for seed in cfg["seeds"]}
    # budget/pool mismatches should surface before any work happens
    probe = run_configs[cfg["seeds"][0]]
    try:
        driver._validate_budget(probe, bench, driver.resolve_n_init(probe, bench))
    except ValueError as err:
        raise ConfigError(str(err), key="budget") from err

    results: dict[int, driver.RunResult] = {}
    failures: dict[int, str] = {}
    workers = min(len(cfg["seeds"]), max(1, os.cpu_count() or 1))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            seed: pool.submit(driver.run, run_configs[seed], bench)
            for seed in cfg["seeds"]
        }
        for seed, fut in futures.items():
            try:
                results[seed] = fut.result()
            except Exception as err:  # noqa: BLE001 - per-seed isolation
                failures[seed] = f"{type(err).__name__}: {err}"

    completed = [s for s in cfg["seeds"] if s in results]
    if len(completed) < 2:
        detail = "; ".join(f"seed {s}: {m}" for s, m in failures.items())
        raise ExperimentError(
            f"only {len(completed)} of {len(cfg['seeds'])} seeds completed; "
            f"aggregation needs >= 2 ({detail})"
        )

    out_dir = fresh_dir(cfg["out"], dir_name or _run_dir_name(cfg))
    trace_paths: dict[int, Path] = {}
    checkpoint_paths: dict[int, Path] = {}
    warnings = [f"seed {s}: {m}" for s, m in failures.items()]
    per_seed: dict[str, dict] = {}
    for seed in completed:
        res = results[seed]
        trace_paths[seed] = out_dir / f"trace-seed{seed}.csv"
        write_trace(trace_paths[seed], res.rows)
        entry = {
            "lambda": res.resolved["lam"],
            "rho": res.resolved["rho"],
            "lambda_history": res.resolved.get("lam_history", []),
            "rho_history": res.resolved.get("rho_history", []),
            "init_ids": res.init_ids,
            "best_y": res.best_y,
            "warnings": res.warnings,
            "trace": trace_paths[seed].name,
            "checkpoint": None,
        }
        if res.model is not None:
            checkpoint_paths[seed] = out_dir / f"checkpoint-seed{seed}.json"
            _write_json(
                checkpoint_paths[seed], _checkpoint_payload(cfg, seed, bench, res)
            )
            entry["checkpoint"] = checkpoint_paths[seed].name
        per_seed[str(seed)] = entry
        warnings.extend(f"seed {seed}: {w}" for w in res.warnings)

    mean, se = aggregate([results[s].rows for s in completed])
    aggregate_path = out_dir / "aggregate.csv"
    write_aggregate(aggregate_path, mean, se)

    first = results[completed[0]]
    manifest = {
        "format": "latentbo-manifest",
        "version": 1,
        "package_version": _package_version(),
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": cfg,
        "benchmark": cfg["benchmark"],
        "strategy": cfg["strategy"],
        "seeds": cfg["seeds"],
        "completed_seeds": completed,
        "failed": {str(s): m for s, m in failures.items()},
        "warnings": warnings,
        "n_init": len(first.init_ids),
        "init_in_budget": False,
        "resolved": {
            "zeta": first.resolved["zeta"],
            "noise_sd": first.noise_sd,
            "beta": {
                "kind": cfg["beta.kind"],
                "constant": cfg["beta.constant"],
                "pool_size": cfg["pool.size"],
                "delta": cfg["beta.delta"],
                "dim": cfg["beta.dim"],
                "radius": cfg["beta.radius"],
                "lipschitz": cfg["beta.lipschitz"],
                "pi2_correction": cfg["beta.pi2_correction"],
            },
        },
        "per_seed": per_seed,
        "aggregate": aggregate_path.name,
        "wall_clock_s": time.perf_counter() - started,
    }
    manifest_path = out_dir / "manifest.json"
    _write_json(manifest_path, manifest)
    return ExperimentResult(
        out_dir=out_dir,
        trace_paths=trace_paths,
        checkpoint_paths=checkpoint_paths,
        aggregate_path=aggregate_path,
        manifest_path=manifest_path,
        manifest=manifest,
        results=results,
        failures=failures,
    )


def _package_version() -> str:
    from . import __version__

    return __version__


# ---------------------------------------------------------------------------
# latent dumps


def _load_checkpoint(path) -> dict:
    try:
        ck = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        raise ExperimentError(f"cannot read checkpoint {path!s}: {err}") from err
    except json.JSONDecodeError as err:
        raise ExperimentError(f"checkpoint {path!s} is not valid JSON: {err.msg}") from err
    if not isinstance(ck, dict) or ck.get("format") != "latentbo-checkpoint":
        raise ExperimentError(f"{path!s} is not a run checkpoint")
    if ck.get("version") != 1:
        raise ExperimentError(f"unsupported checkpoint version {ck.get('version')!r}")
    return ck


def _model_from_checkpoint(ck: dict) -> gp.DeepKernelModel:
    from . import encoder as enc

    hyper = gp.GPHyper(
        log_signal_var=float(ck["gp"]["log_signal_var"]),
        log_lengthscale=float(ck["gp"]["log_lengthscale"]),
        log_noise_var=float(ck["gp"]["log_noise_var"]),
    )
    block = ck.get("encoder")
    if block is None:
        return gp.DeepKernelModel.create(None, hyper)
    spec = enc.EncoderSpec(
        input_dim=int(block["input_dim"]),
        hidden=tuple(int(h) for h in block["hidden"]),
        latent_dim=int(block["latent_dim"]),
        negative_slope=float(block["negative_slope"]),
    )
    store = ParamStore()
    for name, entry in block["params"].items():
        store.add(
            name,
            np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"]),
        )
    return gp.DeepKernelModel.create(spec, hyper, enc_store=store)


def dump_latent(config, checkpoint_path, out_path=None, overrides=()) -> Path:
    """Write a JSON-lines latent dump for every pool point of a finished run.

    Each line records the pool id, latent coordinates, true label, posterior
    mean and variance, the UCB score at the run's final beta, and the
    point-wise separation ratio over latents (null when no other point has a
    different label). Non-model checkpoints cannot exist, so every checkpoint
    dumps.
    """
    cfg = _resolve_source(config, overrides)
    ck = _load_checkpoint(checkpoint_path)
    for key, value in (
        ("benchmark", cfg["benchmark"]),
        ("pool.size", cfg["pool.size"]),
        ("pool.seed", cfg["pool.seed"]),
        ("pool.dim", cfg["pool.dim"]),
    ):
        section, _, leaf = key.partition(".")
        recorded = ck[section][leaf] if leaf else ck[section]
        if recorded != value:
            raise ExperimentError(
                f"checkpoint was produced with {key}={recorded!r} "
                f"but the config says {value!r}"
            )
    bench = build_pool(cfg)
    model = _model_from_checkpoint(ck)
    pool_z = model.encode(bench.x)
    obs_ids = [int(i) for i in ck["obs_ids"]]
    obs_y = np.asarray(ck["obs_y"], dtype=np.float64)
    state = gp.fit(pool_z[obs_ids], obs_y, model.hyper())
    post = gp.posterior(state, pool_z)
    ucb = acq.ucb_score(post, max(float(ck["final_beta"]), 0.0))
    lam_i = col.point_lambda(pool_z, bench.y)

    if out_path is None:
        out_path = Path(checkpoint_path).with_name(f"latent-seed{ck['seed']}.jsonl")
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(bench.size):
            record = {
                "pool_id": i,
                "z": [float(v) for v in pool_z[i]],
                "y": float(bench.y[i]),
                "post_mean": float(post.mean[i]),
                "post_var": float(post.var[i]),
                "ucb": float(ucb[i]),
                "lambda_i": None if not math.isfinite(lam_i[i]) else float(lam_i[i]),
            }
            json.dump(_jsonable(record), fh, allow_nan=False)
            fh.write("\n")
    return out_path


def read_latent_dump(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line]


# ---------------------------------------------------------------------------
# parameter sweeps


SWEEP_PARAMETERS = ("lambda", "rho")


@dataclass
class SweepResult:
    out_dir: Path
    manifest_path: Path
    runs: list[ExperimentResult]
    values: list


def sweep(
    config, parameter: str, values, *, seeds=None, out=None, overrides=()
) -> SweepResult:
    """Run one experiment per penalty value with a shared seed list.

    ``parameter`` is ``"lambda"`` or ``"rho"``; values land on the matching
    ``penalty.*`` key. Every value runs the same seeds so per-value aggregates
    are paired.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(
            f"sweep parameter must be one of {list(SWEEP_PARAMETERS)}, got {parameter!r}"
        )
    values = list(values)
    if len(values) < 2:
        raise ConfigError(f"sweep needs >= 2 values, got {len(values)}")
    key = f"penalty.{parameter}"
    cfg = _resolve_source(config, overrides)
    if seeds is not None:
        cfg = dict(cfg)
        cfg["seeds"] = [int(s) for s in seeds]
        _check_key("seeds", cfg["seeds"])
    for v in values:
        _check_key(key, v)

    root = fresh_dir(out if out is not None else cfg["out"],
                     f"sweep-{parameter}-{time.strftime('%Y%m%d-%H%M%S', time.gmtime())}")
    runs: list[ExperimentResult] = []
    for i, v in enumerate(values):
        sub_cfg = dict(cfg)
        sub_cfg[key] = v
        runs.append(
            run_experiment(sub_cfg, out=root, dir_name=f"{parameter}-{i}")
        )
    manifest_path = root / "sweep.json"
    _write_json(
        manifest_path,
        {
            "format": "latentbo-sweep",
            "version": 1,
            "parameter": parameter,
            "values": values,
            "seeds": cfg["seeds"],
            "runs": [r.out_dir.name for r in runs],
        },
    )
    return SweepResult(out_dir=root, manifest_path=manifest_path, runs=runs, values=values)
