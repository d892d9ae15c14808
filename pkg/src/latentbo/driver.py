"""The sequential optimization loop: acquire, observe, retrain on a schedule.

Five strategies share the loop:

- ``loco``: deep-kernel GP-UCB with the uniform collision regularizer
  (importance weights off, zeta = 0).
- ``dw_loco``: the same with softmax importance weights (zeta from config,
  default 1).
- ``lso``: the unregularized latent-space baseline (rho forced to 0).
- ``gp_raw``: GP-UCB directly on raw inputs (no encoder; NLL-only training of
  the kernel hyperparameters).
- ``random``: a seeded without-replacement shuffle; model-free, its trace
  carries NaN diagnostics.

Runs are bit-reproducible from (config, seed): every random draw comes from
named child streams of one SeedSequence, and all reductions are fixed-order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import acquisition as acq
from . import collision as col
from . import encoder as enc
from . import gp
from .autodiff import adam_step
from .benchmarks import DEFAULT_N_INIT, BenchmarkInstance

STRATEGIES = ("loco", "dw_loco", "lso", "gp_raw", "random")

#: strategies that train a surrogate (everything except random search)
MODEL_STRATEGIES = ("loco", "dw_loco", "lso", "gp_raw")


@dataclass(frozen=True)
class RunConfig:
    """Everything one seeded run needs besides the benchmark pool."""

    strategy: str
    budget: int
    retrain_interval: int = 50
    retrain_epochs: int = 100
    lr: float = 1e-2
    penalty: col.PenaltyConfig = field(default_factory=col.PenaltyConfig)
    schedule: acq.BetaSchedule = field(default_factory=acq.BetaSchedule)
    seed: int = 0
    noise_sd: float | str = "auto"
    hidden: tuple[int, ...] = (1000, 500, 50)
    latent_dim: int = 1
    negative_slope: float = 0.01
    pretrain_epochs: int = 200
    pretrain_lr: float = 1e-2
    n_init: int | str = "auto"
    warmstart_epochs: int = 100
    init_log_signal_var: float = 0.0
    init_log_lengthscale: float = 0.0
    init_log_noise_var: float = math.log(1e-2)
    timing: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.retrain_interval < 1:
            raise ValueError(f"retrain_interval must be >= 1, got {self.retrain_interval}")
        for name in ("retrain_epochs", "pretrain_epochs", "warmstart_epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("lr", "pretrain_lr"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if isinstance(self.noise_sd, str):
            if self.noise_sd != "auto":
                raise ValueError(f"noise_sd must be >= 0 or 'auto', got {self.noise_sd!r}")
        elif not (math.isfinite(self.noise_sd) and self.noise_sd >= 0):
            raise ValueError(f"noise_sd must be >= 0 or 'auto', got {self.noise_sd}")
        if isinstance(self.n_init, str):
            if self.n_init != "auto":
                raise ValueError(f"n_init must be an int or 'auto', got {self.n_init!r}")
        elif self.n_init < 0:
            raise ValueError(f"n_init must be >= 0, got {self.n_init}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass
class TraceRow:
    """One acquisition step of one seeded run."""

    seed: int
    t: int
    pool_id: int
    y: float
    best_y: float
    simple_regret: float
    cum_regret: float
    collision: float
    nll: float
    mse: float
    beta: float
    ms: float


@dataclass
class RetrainResult:
    """Outcome of one (possibly aborted) retraining call."""

    history: list[float]
    lam: float
    rho: float
    aborted: bool = False


@dataclass
class RunResult:
    """Everything a finished run hands to the experiment harness."""

    rows: list[TraceRow]
    best_y: float
    model: gp.DeepKernelModel | None
    obs_ids: list[int]
    obs_y: np.ndarray
    init_ids: list[int]
    resolved: dict
    warnings: list[str]
    noise_sd: float


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Named independent child streams for one run.

    Fixed spawn order keeps every strategy's draws aligned, so strategies that
    skip a stream (random search never pretrains) still replay identically.
    """
    children = np.random.SeedSequence(seed).spawn(4)
    return {
        "pretrain": np.random.default_rng(children[0]),
        "init": np.random.default_rng(children[1]),
        "noise": np.random.default_rng(children[2]),
        "order": np.random.default_rng(children[3]),
    }


def resolve_strategy(strategy: str, penalty: col.PenaltyConfig):
    """Per-strategy effective settings: (uses encoder, rho config, zeta)."""
    if strategy == "loco":
        return True, penalty.rho, 0.0
    if strategy == "dw_loco":
        return True, penalty.rho, float(penalty.zeta)
    if strategy == "lso":
        return True, 0.0, 0.0
    if strategy == "gp_raw":
        return False, 0.0, 0.0
    raise ValueError(f"no model settings for strategy {strategy!r}")


def resolve_noise_sd(config: RunConfig, bench: BenchmarkInstance) -> float:
    if config.noise_sd == "auto":
        return 0.01 * float(bench.y.max() - bench.y.min())
    return float(config.noise_sd)


def resolve_n_init(config: RunConfig, bench: BenchmarkInstance) -> int:
    if config.strategy == "random":
        return 0
    if config.n_init == "auto":
        return DEFAULT_N_INIT[bench.name]
    return int(config.n_init)


def retrain(
    model: gp.DeepKernelModel,
    x: np.ndarray,
    y: np.ndarray,
    *,
    epochs: int,
    lr: float,
    lam_cfg,
    rho_cfg,
    zeta: float,
) -> RetrainResult:
    """Full-batch pair-loss training from the current parameters (warm start).

    lambda is resolved once per call when configured "auto" (rule of thumb on
    the observed inputs); rho likewise (order matching against the current
    NLL). A non-finite loss or a Cholesky failure aborts the call and reverts
    parameters and optimizer state to the snapshot taken on entry.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] < 2:
        raise ValueError(f"retrain needs at least 2 observations, got {y.shape[0]}")
    lam = col.estimate_lambda(x, y) if lam_cfg == "auto" else float(lam_cfg)
    if rho_cfg == "auto":
        nll_now = gp.nll(model.fit_state(x, y))
        raw = col.penalty_term(model.encode(x), y, lam, zeta)
        rho = col.calibrate_rho(nll_now, raw)
    else:
        rho = float(rho_cfg)

    snap = model.store.snapshot()
    history: list[float] = []
    aborted = False
    # blowups are detected by the finite checks; silence the overflow noise
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(epochs):
            model.store.zero_grad()
            try:
                loss = col.pair_loss_graph(model, x, y, lam, rho, zeta)
            except np.linalg.LinAlgError:
                aborted = True
                break
            value = loss.item()
            if not math.isfinite(value):
                aborted = True
                break
            history.append(value)
            loss.backward()
            adam_step(model.store, lr=lr)
        if not aborted and epochs > 0:
            try:
                final = col.pair_loss(model, x, y, lam, rho, zeta)
            except (np.linalg.LinAlgError, ValueError, gp.GPError):
                aborted = True
            else:
                if math.isfinite(final):
                    history.append(final)
                else:
                    aborted = True
    if aborted:
        model.store.restore(snap)
        return RetrainResult(history=history, lam=lam, rho=rho, aborted=True)
    return RetrainResult(history=history, lam=lam, rho=rho, aborted=False)


def _validate_budget(config: RunConfig, bench: BenchmarkInstance, n_init: int) -> None:
    if config.strategy == "random":
        if config.budget > bench.size:
            raise ValueError(
                f"budget {config.budget} exceeds pool size {bench.size}"
            )
        return
    if n_init < 2:
        raise ValueError(
            f"model strategies need n_init >= 2 to warm start, got {n_init}"
        )
    if config.budget + n_init > bench.size:
        raise ValueError(
            f"budget {config.budget} + n_init {n_init} exceeds pool size {bench.size}"
        )


def _run_random(config: RunConfig, bench: BenchmarkInstance, noise_sd: float) -> RunResult:
    streams = rng_streams(config.seed)
    order = streams["order"].permutation(bench.size)
    picks = order[: config.budget]
    rows: list[TraceRow] = []
    best_y = -math.inf
    best_f = -math.inf
    cum = 0.0
    nan = float("nan")
    for t, idx in enumerate(picks, start=1):
        started = time.perf_counter() if config.timing else 0.0
        idx = int(idx)
        f_t = float(bench.y[idx])
        y_t = f_t + noise_sd * float(streams["noise"].standard_normal())
        best_y = max(best_y, y_t)
        best_f = max(best_f, f_t)
        cum += bench.optimum - f_t
        ms = (time.perf_counter() - started) * 1e3 if config.timing else 0.0
        rows.append(
            TraceRow(
                seed=config.seed, t=t, pool_id=idx, y=y_t, best_y=best_y,
                simple_regret=bench.optimum - best_f, cum_regret=cum,
                collision=nan, nll=nan, mse=nan, beta=nan, ms=ms,
            )
        )
    return RunResult(
        rows=rows, best_y=best_y, model=None, obs_ids=[int(i) for i in picks],
        obs_y=np.array([r.y for r in rows]), init_ids=[],
        resolved={"lam": nan, "rho": nan, "zeta": nan},
        warnings=[], noise_sd=noise_sd,
    )


def run(config: RunConfig, bench: BenchmarkInstance) -> RunResult:
    """Execute one seeded run and return its trace.

    Model strategies pretrain the encoder on the unlabeled pool, warm-start
    GP and encoder on a labeled init subset (not counted against the budget),
    then loop: UCB-select an unchosen candidate, observe it under Gaussian
    noise, log diagnostics, and retrain on the pair loss every
    ``retrain_interval`` steps.
    """
    noise_sd = resolve_noise_sd(config, bench)
    n_init = resolve_n_init(config, bench)
    _validate_budget(config, bench, n_init)
    if config.strategy == "random":
        return _run_random(config, bench, noise_sd)

    streams = rng_streams(config.seed)
    warnings: list[str] = []
    uses_encoder, rho_cfg, zeta = resolve_strategy(config.strategy, config.penalty)
    hyper0 = gp.GPHyper(
        log_signal_var=config.init_log_signal_var,
        log_lengthscale=config.init_log_lengthscale,
        log_noise_var=config.init_log_noise_var,
    )
    if uses_encoder:
        spec = enc.EncoderSpec(
            input_dim=bench.input_dim,
            hidden=config.hidden,
            latent_dim=config.latent_dim,
            negative_slope=config.negative_slope,
        )
        pre_store, _ = enc.pretrain_autoencoder(
            bench.x, spec, epochs=config.pretrain_epochs,
            lr=config.pretrain_lr, seed=streams["pretrain"],
        )
        model = gp.DeepKernelModel.create(spec, hyper0, enc_store=pre_store)
    else:
        model = gp.DeepKernelModel.create(None, hyper0)

    init_ids = [int(i) for i in streams["init"].choice(bench.size, n_init, replace=False)]
    obs_ids = list(init_ids)
    obs_y = [
        float(bench.y[i]) + noise_sd * float(streams["noise"].standard_normal())
        for i in init_ids
    ]

    warm = retrain(
        model, bench.x[obs_ids], np.array(obs_y),
        epochs=config.warmstart_epochs, lr=config.lr,
        lam_cfg=config.penalty.lam, rho_cfg=rho_cfg, zeta=zeta,
    )
    if warm.aborted:
        warnings.append("warm-start training aborted on non-finite loss; parameters reverted")
    lam_now, rho_now = warm.lam, warm.rho
    lam_history, rho_history = [warm.lam], [warm.rho]
    retrain_losses = [warm.history[-1]] if warm.history else []

    pool_z = model.encode(bench.x)
    chosen = np.zeros(bench.size, dtype=bool)
    chosen[init_ids] = True
    state = gp.fit(pool_z[obs_ids], np.array(obs_y), model.hyper())

    rows: list[TraceRow] = []
    best_y = -math.inf
    best_f = -math.inf
    cum = 0.0
    beta_clamp_noted = False
    for t in range(1, config.budget + 1):
        started = time.perf_counter() if config.timing else 0.0
        beta_val = acq.beta(config.schedule, t)
        if not beta_clamp_noted and acq.beta_raw(config.schedule, t) < 0:
            warnings.append(f"beta schedule clamped to 0 at t={t}")
            beta_clamp_noted = True
        idx = acq.select(pool_z, state, config.schedule, t, chosen)
        chosen[idx] = True
        f_t = float(bench.y[idx])
        y_t = f_t + noise_sd * float(streams["noise"].standard_normal())
        obs_ids.append(idx)
        obs_y.append(y_t)
        best_y = max(best_y, y_t)
        best_f = max(best_f, f_t)
        cum += bench.optimum - f_t

        y_arr = np.array(obs_y)
        state = gp.fit(pool_z[obs_ids], y_arr, model.hyper())
        obs_z = pool_z[obs_ids]
        coll = col.collision_metric(obs_z, y_arr, lam_now)
        nll_val = gp.nll(state)
        mse = float(((gp.posterior(state, obs_z).mean - y_arr) ** 2).mean())
        ms = (time.perf_counter() - started) * 1e3 if config.timing else 0.0
        rows.append(
            TraceRow(
                seed=config.seed, t=t, pool_id=idx, y=y_t, best_y=best_y,
                simple_regret=bench.optimum - best_f, cum_regret=cum,
                collision=coll, nll=nll_val, mse=mse, beta=beta_val, ms=ms,
            )
        )

        if t % config.retrain_interval == 0 and config.retrain_epochs > 0:
            result = retrain(
                model, bench.x[obs_ids], y_arr,
                epochs=config.retrain_epochs, lr=config.lr,
                lam_cfg=config.penalty.lam, rho_cfg=rho_cfg, zeta=zeta,
            )
            if result.aborted:
                warnings.append(
                    f"retrain at t={t} aborted on non-finite loss; parameters reverted"
                )
            lam_now, rho_now = result.lam, result.rho
            lam_history.append(result.lam)
            rho_history.append(result.rho)
            if result.history:
                retrain_losses.append(result.history[-1])
            pool_z = model.encode(bench.x)
            state = gp.fit(pool_z[obs_ids], y_arr, model.hyper())

    return RunResult(
        rows=rows, best_y=best_y, model=model, obs_ids=obs_ids,
        obs_y=np.array(obs_y), init_ids=init_ids,
        resolved={
            "lam": lam_now, "rho": rho_now, "zeta": zeta,
            "lam_history": lam_history, "rho_history": rho_history,
            "retrain_final_losses": retrain_losses,
        },
        warnings=warnings, noise_sd=noise_sd,
    )


def regret_summary(seed_rows: list[list[TraceRow]]) -> tuple[np.ndarray, np.ndarray]:
    """Per-iteration mean and standard error of simple regret across seeds."""
    if len(seed_rows) < 2:
        raise ValueError(f"regret summary needs >= 2 seeds, got {len(seed_rows)}")
    lengths = {len(rows) for rows in seed_rows}
    if len(lengths) != 1:
        raise ValueError(f"seeds produced ragged trace lengths: {sorted(lengths)}")
    regrets = np.array([[row.simple_regret for row in rows] for rows in seed_rows])
    mean = regrets.mean(axis=0)
    se = regrets.std(axis=0, ddof=1) / math.sqrt(regrets.shape[0])
    return mean, se
