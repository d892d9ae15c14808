"""Exact Gaussian-process regression over the latent space.

The base kernel is squared-exponential with the lengthscale entering
unsquared, k(z, z') = s2 * exp(-||z - z'||^2 / (2 * l)), and the deep kernel
is that kernel composed with the encoder, k(g(x), g(x')). Hyperparameters are
kept in log form so that joint gradient training keeps them positive.

All solves go through one Cholesky factor of K + noise * I. When the factor
fails, a diagonal jitter proportional to the signal variance is escalated by
decades (1e-10 * s2 up to 1e-4 * s2) before giving up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import autodiff as ad
from . import encoder as enc
from ._validation import check_matrix, check_vector


class GPError(RuntimeError):
    """Numerical failure inside the GP layer."""


class GPFitError(GPError):
    """Cholesky failed even at the largest allowed jitter."""


#: negative posterior variances in (-VAR_CLAMP_TOL, 0) are rounded up to zero;
#: anything more negative is treated as a numerics bug and raised.
VAR_CLAMP_TOL = 1e-10

_JITTER_SCALES = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


@dataclass(frozen=True)
class GPHyper:
    """Log-parameterized SE-kernel hyperparameters."""

    log_signal_var: float = 0.0
    log_lengthscale: float = 0.0
    log_noise_var: float = math.log(1e-2)

    def __post_init__(self):
        for name in ("log_signal_var", "log_lengthscale", "log_noise_var"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    @property
    def signal_var(self) -> float:
        return math.exp(self.log_signal_var)

    @property
    def lengthscale(self) -> float:
        return math.exp(self.log_lengthscale)

    @property
    def noise_var(self) -> float:
        return math.exp(self.log_noise_var)


def _self_sqdist(z: np.ndarray) -> np.ndarray:
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _cross_sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = (
        (a * a).sum(axis=1)[:, None]
        + (b * b).sum(axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.maximum(sq, 0.0)


def se_kernel(z1, z2, hyper: GPHyper) -> float:
    """Kernel value for a single pair of latent points."""
    z1 = np.asarray(z1, dtype=np.float64).reshape(-1)
    z2 = np.asarray(z2, dtype=np.float64).reshape(-1)
    sq = float(((z1 - z2) ** 2).sum())
    return hyper.signal_var * math.exp(-sq / (2.0 * hyper.lengthscale))


def se_kernel_matrix(z1: np.ndarray, z2: np.ndarray | None, hyper: GPHyper) -> np.ndarray:
    """Kernel matrix between row sets; ``z2=None`` means the exact self matrix."""
    z1 = np.asarray(z1, dtype=np.float64)
    if z2 is None:
        sq = _self_sqdist(z1)
    else:
        sq = _cross_sqdist(z1, np.asarray(z2, dtype=np.float64))
    return hyper.signal_var * np.exp(-sq / (2.0 * hyper.lengthscale))


@dataclass
class GPState:
    """Frozen posterior state: training latents, targets, and the factorization."""

    z: np.ndarray
    y: np.ndarray
    hyper: GPHyper
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.y.shape[0]


def fit(z: np.ndarray, y: np.ndarray, hyper: GPHyper) -> GPState:
    """Factorize K + noise * I for the observation set.

    Raises :class:`GPFitError` (with a condition-number estimate) if the
    factorization fails at every jitter level.
    """
    z = check_matrix(z, "z")
    y = check_vector(y, "y", n=z.shape[0])
    k = se_kernel_matrix(z, None, hyper)
    m = k + hyper.noise_var * np.eye(z.shape[0])
    if not np.all(np.isfinite(m)):
        raise GPFitError("covariance contains non-finite entries")
    jitters = (0.0, *(s * hyper.signal_var for s in _JITTER_SCALES))
    for jitter in jitters:
        try:
            chol = np.linalg.cholesky(m + jitter * np.eye(z.shape[0]) if jitter else m)
        except np.linalg.LinAlgError:
            continue
        alpha = scipy.linalg.cho_solve((chol, True), y)
        return GPState(z=z, y=y.copy(), hyper=hyper, chol=chol, alpha=alpha, jitter=jitter)
    cond = float(np.linalg.cond(m))
    raise GPFitError(
        f"covariance factorization failed at jitter up to {jitters[-1]:.3e} "
        f"(condition estimate {cond:.3e})"
    )


@dataclass
class Posterior:
    """Pointwise posterior moments at the query points."""

    mean: np.ndarray
    var: np.ndarray

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.var)


def posterior(state: GPState, zq: np.ndarray) -> Posterior:
    """Posterior mean and (noise-free) variance at query latents."""
    zq = check_matrix(zq, "zq", n_cols=state.z.shape[1])
    k_cross = se_kernel_matrix(state.z, zq, state.hyper)
    mean = k_cross.T @ state.alpha
    v = scipy.linalg.solve_triangular(state.chol, k_cross, lower=True)
    var = state.hyper.signal_var - np.einsum("ij,ij->j", v, v)
    bad = var < -VAR_CLAMP_TOL
    if np.any(bad):
        raise GPError(
            f"posterior variance fell below -{VAR_CLAMP_TOL:g} "
            f"(min {var.min():.3e}); covariance is numerically broken"
        )
    return Posterior(mean=mean, var=np.maximum(var, 0.0))


def nll(state: GPState) -> float:
    """Standard Gaussian negative log marginal likelihood of the fit."""
    return float(
        0.5 * state.y @ state.alpha
        + np.log(np.diag(state.chol)).sum()
        + 0.5 * state.n * math.log(2.0 * math.pi)
    )


def nll_graph(store: ad.ParamStore, z: ad.Tensor, y: np.ndarray) -> ad.Tensor:
    """Differentiable NLL as a function of latents and log hyperparameters.

    Reads gp.log_signal_var / gp.log_lengthscale / gp.log_noise_var from the
    store, so gradients flow into both the encoder (through ``z``) and the
    kernel hyperparameters.
    """
    y = check_vector(y, "y")
    n = y.shape[0]
    sv = ad.exp(store["gp.log_signal_var"])
    ls = ad.exp(store["gp.log_lengthscale"])
    nv = ad.exp(store["gp.log_noise_var"])
    d2 = ad.pairwise_sqdist(z)
    k = sv * ad.exp(-(d2 / (2.0 * ls)))
    m = k + nv * ad.constant(np.eye(n))
    return ad.gaussian_nll(m, y)


def information_gain(step_variances: np.ndarray, noise_var: float) -> float:
    """Half the summed log(1 + var/noise) over sequential one-step variances."""
    v = np.asarray(step_variances, dtype=np.float64)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("step variances must be finite and non-negative")
    if not noise_var > 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    return float(0.5 * np.log1p(v / noise_var).sum())


def add_gp_params(store: ad.ParamStore, hyper: GPHyper) -> None:
    """Register the three log hyperparameters as trainable scalars."""
    store.add("gp.log_signal_var", hyper.log_signal_var)
    store.add("gp.log_lengthscale", hyper.log_lengthscale)
    store.add("gp.log_noise_var", hyper.log_noise_var)


@dataclass
class DeepKernelModel:
    """Encoder plus GP hyperparameters sharing one parameter store.

    ``spec=None`` means the identity encoder (the GP works on raw inputs), the
    shape used by the plain GP-UCB baseline.
    """

    store: ad.ParamStore
    spec: enc.EncoderSpec | None

    @classmethod
    def create(
        cls,
        spec: enc.EncoderSpec | None,
        hyper: GPHyper,
        rng: np.random.Generator | None = None,
        enc_store: ad.ParamStore | None = None,
    ) -> "DeepKernelModel":
        """Build a model from a pretrained encoder store or a fresh init."""
        if spec is None:
            store = ad.ParamStore()
        elif enc_store is not None:
            store = ad.ParamStore()
            for name, t in enc_store.items():
                store.add(name, t.value.copy())
        else:
            if rng is None:
                raise ValueError("need rng to initialize a fresh encoder")
            store = enc.init_encoder(spec, rng)
        add_gp_params(store, hyper)
        return cls(store=store, spec=spec)

    def hyper(self) -> GPHyper:
        return GPHyper(
            log_signal_var=float(self.store["gp.log_signal_var"].value),
            log_lengthscale=float(self.store["gp.log_lengthscale"].value),
            log_noise_var=float(self.store["gp.log_noise_var"].value),
        )

    def encode(self, x: np.ndarray) -> np.ndarray:
        if self.spec is None:
            return check_matrix(x, "x")
        return enc.encode(self.store, self.spec, x)

    def encode_graph(self, x: np.ndarray) -> ad.Tensor:
        xc = ad.constant(check_matrix(x, "x"))
        if self.spec is None:
            return xc
        return enc.encode_graph(self.store, self.spec, xc)

    def fit_state(self, x: np.ndarray, y: np.ndarray) -> GPState:
        return fit(self.encode(x), y, self.hyper())

    def latent_dim(self) -> int | None:
        return None if self.spec is None else self.spec.latent_dim


def deep_kernel(model: DeepKernelModel, x1, x2) -> float:
    """k(g(x1), g(x2)): the SE kernel composed with the encoder."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    x2 = np.atleast_2d(np.asarray(x2, dtype=np.float64))
    z1 = model.encode(x1)[0]
    z2 = model.encode(x2)[0]
    return se_kernel(z1, z2, model.hyper())
