"""Collision penalty on the latent space and the penalized training loss.

Two pool points collide when their latent distance is smaller than lambda
times their label gap; the penalty for an ordered pair is the amount of that
shortfall, max(lambda*|y_i - y_j| - ||z_i - z_j||, 0). The training loss adds
the importance-weighted mean penalty over all ordered pairs (self pairs
included; they contribute zero) to the GP marginal NLL:

    loss = nll + (rho / n^2) * sum_ij w_ij * p_ij

with softmax weights w_ij proportional to exp(zeta * (y_i + y_j)). zeta = 0
gives uniform weights (plain collision regularization); zeta > 0 focuses the
budget on high-label pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import gp
from ._validation import check_matrix, check_vector


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty hyperparameters; "auto" defers to data-driven resolution."""

    lam: float | str = 1.0
    rho: float | str = "auto"
    zeta: float = 1.0

    def __post_init__(self):
        if isinstance(self.lam, str):
            if self.lam != "auto":
                raise ValueError(f"lam must be positive or 'auto', got {self.lam!r}")
        elif not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be positive or 'auto', got {self.lam}")
        if isinstance(self.rho, str):
            if self.rho != "auto":
                raise ValueError(f"rho must be >= 0 or 'auto', got {self.rho!r}")
        elif not (np.isfinite(self.rho) and self.rho >= 0):
            raise ValueError(f"rho must be >= 0 or 'auto', got {self.rho}")
        if not np.isfinite(self.zeta):
            raise ValueError(f"zeta must be finite, got {self.zeta}")


def _pair_dists(z: np.ndarray) -> np.ndarray:
    diff = z[:, None, :] - z[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def penalty(z_i, y_i: float, z_j, y_j: float, lam: float) -> float:
    """Shortfall of one ordered pair: max(lam*|y_i-y_j| - ||z_i-z_j||, 0)."""
    z_i = np.asarray(z_i, dtype=np.float64).reshape(-1)
    z_j = np.asarray(z_j, dtype=np.float64).reshape(-1)
    gap = lam * abs(float(y_i) - float(y_j))
    dist = float(np.linalg.norm(z_i - z_j))
    return max(gap - dist, 0.0)


def penalty_matrix(z: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """All ordered-pair penalties as an n x n matrix (zero diagonal)."""
    z = check_matrix(z, "z")
    y = check_vector(y, "y", n=z.shape[0])
    gaps = lam * np.abs(y[:, None] - y[None, :])
    return np.maximum(gaps - _pair_dists(z), 0.0)


def pair_weights(y: np.ndarray, zeta: float) -> np.ndarray:
    """Softmax importance weights over ordered pairs, w_ij ~ exp(zeta*(y_i+y_j)).

    Computed with a max shift so large labels cannot overflow; the matrix sums
    to one. zeta = 0 returns the uniform 1/n^2 matrix.
    """
    y = check_vector(y, "y")
    s = zeta * (y[:, None] + y[None, :])
    s = np.exp(s - s.max())
    return s / s.sum()


def penalty_term(z: np.ndarray, y: np.ndarray, lam: float, zeta: float) -> float:
    """The regularizer at rho = 1: (1/n^2) * sum_ij w_ij * p_ij."""
    p = penalty_matrix(z, y, lam)
    w = pair_weights(y, zeta)
    n = p.shape[0]
    return float((w * p).sum() / (n * n))


def penalty_term_graph(z: ad.Tensor, y: np.ndarray, lam: float, zeta: float) -> ad.Tensor:
    """Differentiable twin of :func:`penalty_term` (weights are constants)."""
    y = check_vector(y, "y")
    n = y.shape[0]
    gaps = ad.constant(lam * np.abs(y[:, None] - y[None, :]))
    w = ad.constant(pair_weights(y, zeta))
    shortfall = ad.relu(gaps - ad.pairwise_dist(z))
    return ad.tsum(w * shortfall) / float(n * n)


def pair_loss(model: gp.DeepKernelModel, x, y, lam: float, rho: float, zeta: float) -> float:
    """Numeric training loss: GP NLL plus the weighted collision term."""
    x = check_matrix(x, "x")
    y = check_vector(y, "y", n=x.shape[0])
    value = gp.nll(model.fit_state(x, y))
    if rho != 0.0:
        value += rho * penalty_term(model.encode(x), y, lam, zeta)
    return value


def pair_loss_graph(
    model: gp.DeepKernelModel, x, y, lam: float, rho: float, zeta: float
) -> ad.Tensor:
    """Differentiable training loss over encoder and GP hyperparameters."""
    x = check_matrix(x, "x")
    y = check_vector(y, "y", n=x.shape[0])
    z = model.encode_graph(x)
    loss = gp.nll_graph(model.store, z, y)
    if rho != 0.0:
        loss = loss + rho * penalty_term_graph(z, y, lam, zeta)
    return loss


def estimate_lambda(x: np.ndarray, y: np.ndarray) -> float:
    """Rule-of-thumb lambda: the input-space distance per unit label gap.

    Over all pairs with distinct labels, the minimum of
    ||x_i - x_j|| / |y_i - y_j|. At this value no pair is penalized in the
    input space, while any larger value starts penalizing the tightest pair.
    """
    x = check_matrix(x, "x")
    y = check_vector(y, "y", n=x.shape[0])
    gaps = np.abs(y[:, None] - y[None, :])
    mask = gaps > 0.0
    if not mask.any():
        raise ValueError("cannot estimate lambda: all labels are identical")
    dists = _pair_dists(x)
    ratios = dists[mask] / gaps[mask]
    lam = float(ratios.min())
    if lam <= 0.0:
        raise ValueError(
            "cannot estimate lambda: coincident inputs carry distinct labels"
        )
    # the division can round the binding ratio up by an ulp, which would
    # penalize that pair at exactly lam; step down until no hinge is active
    while (penalty_matrix(x, y, lam) > 0.0).any():
        lam = float(np.nextafter(lam, 0.0))
    return lam


def point_lambda(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-point version of the rule of thumb, for diagnostics.

    lambda_i = min over j with y_j != y_i of ||x_i - x_j|| / |y_i - y_j|;
    NaN when point i has no partner with a different label. Works over
    whatever coordinates are passed: inputs for calibration, latents for
    latent-space dumps.
    """
    x = check_matrix(x, "x")
    y = check_vector(y, "y", n=x.shape[0])
    gaps = np.abs(y[:, None] - y[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(gaps > 0.0, _pair_dists(x) / gaps, np.inf)
    out = ratios.min(axis=1)
    return np.where(np.isfinite(out), out, np.nan)


def calibrate_rho(nll_value: float, raw_penalty: float) -> float:
    """Pick rho so the penalty term starts at the same order as the NLL.

    A zero raw penalty means nothing to balance: rho = 1. Otherwise
    rho = |nll| / (raw_penalty + 1e-8); a zero NLL then gives rho = 0.
    """
    if raw_penalty < 0:
        raise ValueError(f"raw_penalty must be >= 0, got {raw_penalty}")
    if raw_penalty == 0.0:
        return 1.0
    return abs(nll_value) / (raw_penalty + 1e-8)


def collision_metric(z: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Mean ordered-pair penalty: how collapsed the latent layout is."""
    p = penalty_matrix(z, y, lam)
    n = p.shape[0]
    return float(p.sum() / (n * n))
