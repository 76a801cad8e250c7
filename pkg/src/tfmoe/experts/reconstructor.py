"""Per-expert VAE reconstructors with a learnable Gaussian prior.

Reconstructors carry most of the continual-learning machinery: their
evidence scores drive gating, localized-group assignment, replay ranking
and prior sampling for rehearsal.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Adam, ParamStore, Tensor, glorot_uniform, no_grad
from ..autodiff import ops
from ..errors import NumericError
from ..seeding import rng_for

DEFAULT_HIDDEN = (128, 64)
LOG_2PI = float(np.log(2.0 * np.pi))
PRIOR_LOG_VAR_CLAMP = 20.0


class VaeExpert:
    """Encoder (shared trunk, mean/log-var heads), decoder, learnable prior."""

    def __init__(self, store: ParamStore, index: int, width: int, d_z: int,
                 rng: np.random.Generator, hidden=DEFAULT_HIDDEN):
        self.store = store
        self.index = index
        self.width = width
        self.d_z = d_z
        prefix = f"expert{index}/recon"
        g = "reconstructor"

        def lin(name, d_in, d_out):
            w = store.add(f"{prefix}/{name}/weight",
                          glorot_uniform(rng, (d_in, d_out), d_in, d_out), g)
            b = store.add(f"{prefix}/{name}/bias", np.zeros(d_out), g)
            return w, b

        self.enc1 = lin("enc1", width, hidden[0])
        self.enc2 = lin("enc2", hidden[0], hidden[1])
        self.enc_mean = lin("enc_mean", hidden[1], d_z)
        self.enc_log_var = lin("enc_log_var", hidden[1], d_z)
        self.dec1 = lin("dec1", d_z, hidden[1])
        self.dec2 = lin("dec2", hidden[1], hidden[0])
        self.dec3 = lin("dec3", hidden[0], width)
        self.prior_mean = store.add(f"{prefix}/prior_mean", np.zeros(d_z), g)
        self.prior_log_var = store.add(f"{prefix}/prior_log_var", np.zeros(d_z), g)

    def encode(self, x) -> tuple[Tensor, Tensor]:
        h = ops.relu(ops.apply_linear(ops.as_tensor(x), *self.enc1))
        h = ops.relu(ops.apply_linear(h, *self.enc2))
        return (
            ops.apply_linear(h, *self.enc_mean),
            ops.apply_linear(h, *self.enc_log_var),
        )

    def decode(self, z) -> Tensor:
        h = ops.relu(ops.apply_linear(ops.as_tensor(z), *self.dec1))
        h = ops.relu(ops.apply_linear(h, *self.dec2))
        return ops.apply_linear(h, *self.dec3)

    def clamp_prior(self) -> None:
        np.clip(self.prior_log_var.data, -PRIOR_LOG_VAR_CLAMP, PRIOR_LOG_VAR_CLAMP,
                out=self.prior_log_var.data)


def elbo_rows(expert: VaeExpert, x, noise) -> Tensor:
    """Single-sample ELBO per row of ``x`` (shape [n, width] -> [n]).

    The decoder likelihood is a unit-variance Gaussian per dimension, so
    the reconstruction term is -0.5*||x - x_hat||^2 - (width/2)*log(2*pi);
    the KL term is against the expert's learnable diagonal prior.
    """
    x = ops.as_tensor(x)
    q_mean, q_log_var = expert.encode(x)
    z = ops.reparameterize(q_mean, q_log_var, noise)
    recon = expert.decode(z)
    sq = ops.sub(recon, x)
    row_sse = ops.sum_last(ops.mul(sq, sq))
    kl = ops.gaussian_kl_rows(q_mean, q_log_var, expert.prior_mean, expert.prior_log_var)
    return ops.add_const(ops.sub(ops.scale(row_sse, -0.5), kl), -0.5 * expert.width * LOG_2PI)


def vae_elbo(expert: VaeExpert, x, noise) -> Tensor:
    """Total ELBO over all rows (scalar Tensor, differentiable)."""
    x = ops.as_tensor(x)
    if x.ndim == 1:
        x = ops.reshape(x, (1, x.shape[0]))
        noise = np.asarray(noise).reshape(1, -1)
    out = ops.sum_all(elbo_rows(expert, x, noise))
    if not np.isfinite(out.data):
        raise NumericError("ELBO evaluated to a non-finite value")
    return out


def train_group_reconstructors(
    experts: list[VaeExpert],
    groups: list[list[int]],
    weeks: np.ndarray,
    epochs: int,
    lr: float,
    rng: np.random.Generator,
) -> list[float]:
    """Maximise the summed per-group ELBO with Adam; returns the mean-ELBO
    trajectory (per member, per epoch). Empty groups contribute nothing."""
    if not experts:
        return []
    store = experts[0].store
    opt = Adam(store, lr={"reconstructor": lr}, groups=("reconstructor",))
    members = sum(len(g) for g in groups)
    history = []
    for _ in range(epochs):
        opt.zero_grad()
        total = None
        for expert, group in zip(experts, groups):
            if not group:
                continue
            x = weeks[group]
            noise = rng.standard_normal((len(group), expert.d_z))
            term = vae_elbo(expert, x, noise)
            total = term if total is None else ops.add(total, term)
        if total is None:
            opt.step()
            history.append(0.0)
            continue
        loss = ops.neg(total)
        if not np.isfinite(loss.data):
            raise NumericError("reconstructor training diverged")
        loss.backward()
        opt.step()
        for expert in experts:
            expert.clamp_prior()
        history.append(float(total.data) / max(members, 1))
    return history


def evidence_matrix(experts: list[VaeExpert], weeks: np.ndarray, seed: int) -> np.ndarray:
    """Per-(node, expert) single-sample ELBO scores in nats.

    One fixed standard-normal draw per node, shared across experts, keeps
    the comparison fair and the result deterministic for a given seed.
    """
    weeks = np.asarray(weeks, dtype=np.float64)
    n = weeks.shape[0]
    d_z = experts[0].d_z
    noise = rng_for(seed, "evidence").standard_normal((n, d_z))
    out = np.empty((n, len(experts)))
    with no_grad():
        for k, expert in enumerate(experts):
            out[:, k] = elbo_rows(expert, weeks, noise).data
    if not np.isfinite(out).all():
        raise NumericError("evidence matrix contains non-finite scores")
    return out


def sample_prior(expert: VaeExpert, count: int, rng: np.random.Generator) -> np.ndarray:
    """Decode ``count`` latent draws from the expert's prior into week
    profiles (decoder mean, no output noise)."""
    if count <= 0:
        return np.empty((0, expert.width))
    sigma = np.exp(0.5 * expert.prior_log_var.data)
    z = expert.prior_mean.data + sigma * rng.standard_normal((count, expert.d_z))
    with no_grad():
        weeks = expert.decode(z).data
    if not np.isfinite(weeks).all():
        raise NumericError("prior sampling produced non-finite weeks")
    return weeks
