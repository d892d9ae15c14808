"""Scikit-learn style wrappers around the encoder and the penalized deep GP.

These give the package's core pieces the standard fit/transform/predict
surface (get_params, set_params, clone, NotFittedError) so they compose with
sklearn pipelines. The optimization loop itself stays in
:mod:`latentbo.driver`; a sequential acquisition process is not an estimator.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import driver
from . import encoder as enc
from . import gp
from ._validation import check_matrix, check_vector
from .collision import PenaltyConfig


class LatentSpaceEncoder(TransformerMixin, BaseEstimator):
    """Dense encoder pretrained as an autoencoder on the training inputs.

    Parameters
    ----------
    hidden : tuple of int, default (1000, 500, 50)
        Hidden-layer widths of the encoder.
    latent_dim : int, default 1
        Output dimension of the latent space.
    negative_slope : float, default 0.01
        Leaky-ReLU slope used on every layer.
    epochs : int, default 200
        Full-batch reconstruction epochs.
    lr : float, default 1e-2
        Adam learning rate for pretraining.
    random_state : int, default 0
        Seed for weight initialization.

    Attributes
    ----------
    spec_ : EncoderSpec
        Resolved architecture.
    store_ : ParamStore
        Trained encoder parameters (decoder discarded).
    history_ : list of float
        Reconstruction MSE per epoch plus the final value.
    """

    def __init__(
        self,
        hidden=(1000, 500, 50),
        latent_dim=1,
        negative_slope=0.01,
        epochs=200,
        lr=1e-2,
        random_state=0,
    ):
        self.hidden = hidden
        self.latent_dim = latent_dim
        self.negative_slope = negative_slope
        self.epochs = epochs
        self.lr = lr
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        self.spec_ = enc.EncoderSpec(
            input_dim=X.shape[1],
            hidden=tuple(self.hidden),
            latent_dim=self.latent_dim,
            negative_slope=self.negative_slope,
        )
        self.store_, self.history_ = enc.pretrain_autoencoder(
            X, self.spec_, epochs=self.epochs, lr=self.lr, seed=self.random_state
        )
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "store_")
        X = check_matrix(X, "X", n_cols=self.n_features_in_)
        return enc.encode(self.store_, self.spec_, X)


class CollisionFreeGPRegressor(RegressorMixin, BaseEstimator):
    """Deep-kernel GP trained with the collision-penalized marginal likelihood.

    ``fit`` pretrains the encoder on the inputs, then jointly trains encoder
    and kernel hyperparameters on the penalized negative log marginal
    likelihood. ``predict`` returns the GP posterior mean at the encoded
    query points (optionally with the posterior standard deviation).

    Parameters
    ----------
    hidden, latent_dim, negative_slope
        Encoder architecture, as in :class:`LatentSpaceEncoder`.
    lam : float or "auto", default "auto"
        Required latent separation per unit label gap; "auto" uses the
        input-space rule of thumb.
    rho : float or "auto", default "auto"
        Penalty weight; "auto" matches the initial NLL's order of magnitude.
    zeta : float, default 0.0
        Importance-weight temperature over pair label sums; 0 keeps the
        penalty uniform.
    epochs : int, default 100
        Joint training epochs.
    lr : float, default 1e-2
        Adam learning rate for joint training.
    pretrain_epochs : int, default 200
    pretrain_lr : float, default 1e-2
        Autoencoder pretraining settings.
    init_log_signal_var, init_log_lengthscale, init_log_noise_var : float
        Initial kernel hyperparameters (log scale).
    random_state : int, default 0

    Attributes
    ----------
    model_ : DeepKernelModel
        Trained encoder and kernel hyperparameters.
    state_ : GPState
        Posterior factorization over the training set.
    lambda_, rho_ : float
        Resolved penalty parameters.
    history_ : list of float
        Pair loss per epoch plus the final value.
    """

    def __init__(
        self,
        hidden=(1000, 500, 50),
        latent_dim=1,
        negative_slope=0.01,
        lam="auto",
        rho="auto",
        zeta=0.0,
        epochs=100,
        lr=1e-2,
        pretrain_epochs=200,
        pretrain_lr=1e-2,
        init_log_signal_var=0.0,
        init_log_lengthscale=0.0,
        init_log_noise_var=math.log(1e-2),
        random_state=0,
    ):
        self.hidden = hidden
        self.latent_dim = latent_dim
        self.negative_slope = negative_slope
        self.lam = lam
        self.rho = rho
        self.zeta = zeta
        self.epochs = epochs
        self.lr = lr
        self.pretrain_epochs = pretrain_epochs
        self.pretrain_lr = pretrain_lr
        self.init_log_signal_var = init_log_signal_var
        self.init_log_lengthscale = init_log_lengthscale
        self.init_log_noise_var = init_log_noise_var
        self.random_state = random_state

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = check_vector(y, "y", n=X.shape[0])
        if X.shape[0] < 2:
            raise ValueError("need at least 2 samples to fit")
        PenaltyConfig(lam=self.lam, rho=self.rho, zeta=self.zeta)
        spec = enc.EncoderSpec(
            input_dim=X.shape[1],
            hidden=tuple(self.hidden),
            latent_dim=self.latent_dim,
            negative_slope=self.negative_slope,
        )
        pre_store, _ = enc.pretrain_autoencoder(
            X, spec, epochs=self.pretrain_epochs, lr=self.pretrain_lr,
            seed=self.random_state,
        )
        hyper = gp.GPHyper(
            log_signal_var=self.init_log_signal_var,
            log_lengthscale=self.init_log_lengthscale,
            log_noise_var=self.init_log_noise_var,
        )
        model = gp.DeepKernelModel.create(spec, hyper, enc_store=pre_store)
        result = driver.retrain(
            model, X, y, epochs=self.epochs, lr=self.lr,
            lam_cfg=self.lam, rho_cfg=self.rho, zeta=self.zeta,
        )
        self.model_ = model
        self.lambda_ = result.lam
        self.rho_ = result.rho
        self.history_ = result.history
        self.training_aborted_ = result.aborted
        self.state_ = model.fit_state(X, y)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "model_")
        X = check_matrix(X, "X", n_cols=self.n_features_in_)
        post = gp.posterior(self.state_, self.model_.encode(X))
        if return_std:
            return post.mean, post.sd
        return post.mean

    def transform(self, X):
        """Latent coordinates of ``X`` under the trained encoder."""
        check_is_fitted(self, "model_")
        X = check_matrix(X, "X", n_cols=self.n_features_in_)
        return self.model_.encode(X)
