"""Dense feed-forward encoder g: X -> Z and its autoencoder pretraining.

The encoder is a stack of affine layers with leaky-ReLU activations on every
layer including the output (so the latent map stays piecewise linear but
non-degenerate). Pretraining attaches a mirrored decoder (linear output),
trains the pair as an autoencoder on full-batch reconstruction MSE with Adam,
then discards the decoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from ._validation import check_matrix


@dataclass(frozen=True)
class EncoderSpec:
    """Architecture of the encoder network."""

    input_dim: int
    hidden: tuple[int, ...] = (1000, 500, 50)
    latent_dim: int = 1
    hidden_activation: str = "leaky_relu"
    output_activation: str = "leaky_relu"
    negative_slope: float = 0.01

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.latent_dim < 1:
            raise ValueError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden}")
        for act in (self.hidden_activation, self.output_activation):
            if act not in ("identity", "tanh", "leaky_relu", "relu"):
                raise ValueError(f"unknown activation {act!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden, self.latent_dim]
        return list(zip(dims[:-1], dims[1:]))

    def n_layers(self) -> int:
        return len(self.hidden) + 1


def init_encoder(
    spec: EncoderSpec,
    rng: np.random.Generator,
    store: ad.ParamStore | None = None,
    prefix: str = "enc",
) -> ad.ParamStore:
    """Register freshly initialized encoder layers, returning the store."""
    if store is None:
        store = ad.ParamStore()
    for i, (din, dout) in enumerate(spec.layer_dims()):
        ad.init_dense(store, f"{prefix}.{i}", din, dout, rng)
    return store


def _activation_for(spec: EncoderSpec, layer: int) -> str:
    last = spec.n_layers() - 1
    return spec.output_activation if layer == last else spec.hidden_activation


def encode_graph(
    store: ad.ParamStore, spec: EncoderSpec, x: ad.Tensor, prefix: str = "enc"
) -> ad.Tensor:
    """Differentiable forward pass; ``x`` is an (n, input_dim) tensor."""
    h = x
    for i in range(spec.n_layers()):
        h = ad.dense(store, f"{prefix}.{i}", h, _activation_for(spec, i), spec.negative_slope)
    return h


def encode(
    store: ad.ParamStore, spec: EncoderSpec, x: np.ndarray, prefix: str = "enc"
) -> np.ndarray:
    """Graph-free forward pass returning an (n, latent_dim) float64 array."""
    h = check_matrix(x, "x", n_cols=spec.input_dim)
    for i in range(spec.n_layers()):
        h = ad.dense_forward(
            store[f"{prefix}.{i}.W"].value,
            store[f"{prefix}.{i}.b"].value,
            h,
            _activation_for(spec, i),
            spec.negative_slope,
        )
    return h


def _decoder_spec(spec: EncoderSpec) -> EncoderSpec:
    return EncoderSpec(
        input_dim=spec.latent_dim,
        hidden=tuple(reversed(spec.hidden)),
        latent_dim=spec.input_dim,
        hidden_activation=spec.hidden_activation,
        output_activation="identity",
        negative_slope=spec.negative_slope,
    )


def pretrain_autoencoder(
    x: np.ndarray,
    spec: EncoderSpec,
    epochs: int = 200,
    lr: float = 1e-2,
    seed: int = 0,
) -> tuple[ad.ParamStore, list[float]]:
    """Train encoder+decoder on reconstruction MSE, return encoder-only store.

    The returned history has ``epochs + 1`` entries: the loss before each
    update and the final loss after the last one. ``epochs=0`` returns freshly
    initialized weights untouched (history holds just the initial loss).
    """
    x = check_matrix(x, "x", n_cols=spec.input_dim)
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    dec_spec = _decoder_spec(spec)
    store = init_encoder(spec, rng, prefix="enc")
    init_encoder(dec_spec, rng, store=store, prefix="dec")

    def loss_graph():
        xin = ad.constant(x)
        z = encode_graph(store, spec, xin, prefix="enc")
        recon = encode_graph(store, dec_spec, z, prefix="dec")
        delta = recon - xin
        return ad.mean(delta * delta)

    history: list[float] = []
    for _ in range(epochs):
        loss = loss_graph()
        history.append(loss.item())
        loss.backward()
        ad.adam_step(store, lr=lr)
    history.append(loss_graph().item())

    out = ad.ParamStore()
    for name, t in store.items():
        if name.startswith("enc."):
            out.add(name, t.value.copy())
    return out, history


def save_params(store: ad.ParamStore, path) -> None:
    """Write every parameter as name -> {shape, row-major values} JSON."""
    payload = {
        "format": "latentbo-params",
        "version": 1,
        "params": {
            name: {"shape": list(t.value.shape), "values": t.value.reshape(-1).tolist()}
            for name, t in store.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_params(path) -> ad.ParamStore:
    """Inverse of :func:`save_params`; values round-trip bit exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "latentbo-params":
        raise ValueError(f"{path}: not a parameter file")
    store = ad.ParamStore()
    for name, entry in payload["params"].items():
        arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        store.add(name, arr)
    return store
