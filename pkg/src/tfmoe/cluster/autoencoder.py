"""Feature-extractor autoencoder for the pre-training stage."""

from __future__ import annotations

import numpy as np

from ..autodiff import Adam, ParamStore, Tensor, glorot_uniform, no_grad
from ..autodiff import ops
from ..errors import NumericError

DEFAULT_HIDDEN = (128, 64)


class PretrainAutoencoder:
    """Three-layer MLP encoder mirrored by a three-layer decoder.

    Widths run ``width -> hidden[0] -> hidden[1] -> d_z`` and back; ReLU
    between layers, linear output heads.
    """

    def __init__(self, store: ParamStore, width: int, d_z: int,
                 rng: np.random.Generator, hidden=DEFAULT_HIDDEN, prefix="pretrain"):
        self.store = store
        self.width = width
        self.d_z = d_z
        enc_dims = [width, hidden[0], hidden[1], d_z]
        dec_dims = [d_z, hidden[1], hidden[0], width]
        self._enc = self._build(f"{prefix}/enc", enc_dims, rng)
        self._dec = self._build(f"{prefix}/dec", dec_dims, rng)

    def _build(self, prefix, dims, rng):
        layers = []
        for i, (d_in, d_out) in enumerate(zip(dims, dims[1:]), start=1):
            w = self.store.add(f"{prefix}{i}/weight",
                               glorot_uniform(rng, (d_in, d_out), d_in, d_out),
                               "pretrain_reconstructor")
            b = self.store.add(f"{prefix}{i}/bias", np.zeros(d_out), "pretrain_reconstructor")
            layers.append((w, b))
        return layers

    @staticmethod
    def _mlp(layers, x: Tensor) -> Tensor:
        out = x
        for i, (w, b) in enumerate(layers):
            out = ops.apply_linear(out, w, b)
            if i < len(layers) - 1:
                out = ops.relu(out)
        return out

    def encode(self, x) -> Tensor:
        return self._mlp(self._enc, ops.as_tensor(x))

    def decode(self, z) -> Tensor:
        return self._mlp(self._dec, ops.as_tensor(z))

    def reconstruct(self, x) -> Tensor:
        return self.decode(self.encode(x))


def reconstruction_loss(model: PretrainAutoencoder, weeks) -> Tensor:
    """Mean over nodes of the L1 reconstruction error of their week profile."""
    weeks = ops.as_tensor(weeks)
    n_nodes = weeks.shape[0]
    return ops.scale(ops.sum_abs_diff(model.reconstruct(weeks), weeks), 1.0 / n_nodes)


def pretrain_autoencoder(
    weeks: np.ndarray,
    d_z: int,
    epochs: int,
    lr: float,
    rng: np.random.Generator,
    hidden=DEFAULT_HIDDEN,
    store: ParamStore | None = None,
) -> tuple[PretrainAutoencoder, list[float]]:
    """Fit the autoencoder on normalized week profiles with full-batch Adam."""
    store = store if store is not None else ParamStore()
    model = PretrainAutoencoder(store, width=weeks.shape[1], d_z=d_z, rng=rng, hidden=hidden)
    opt = Adam(store, lr={"pretrain_reconstructor": lr}, groups=("pretrain_reconstructor",))
    x = Tensor(weeks)
    losses = []
    for _ in range(epochs):
        opt.zero_grad()
        loss = reconstruction_loss(model, x)
        value = float(loss.data)
        if not np.isfinite(value):
            raise NumericError("autoencoder pre-training diverged to a non-finite loss")
        loss.backward()
        opt.step()
        losses.append(value)
    return model, losses


def encode_latents(model: PretrainAutoencoder, weeks) -> np.ndarray:
    """Deterministic encoder pass, no tape."""
    with no_grad():
        return model.encode(np.asarray(weeks, dtype=np.float64)).data
