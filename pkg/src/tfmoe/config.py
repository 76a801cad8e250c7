"""Experiment configuration shared by the engine, protocols and CLI."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, fields

from .errors import ConfigError

PROTOCOLS = ("tfmoe", "static", "expansible", "retrained")


@dataclass
class ExperimentConfig:
    # experts / model dims
    k: int = 4
    d_z_pretrain: int = 32  # pre-training autoencoder latent width
    d_z: int = 32  # VAE latent width
    d_embed: int = 32  # graph-learning embedding width
    channels: int = 32  # temporal conv hidden channels
    m_steps: int = 1  # diffusion steps
    # objectives
    alpha: float = 1e-4  # clustering-loss weight
    beta: float = 0.1  # consolidation-loss weight
    ns_frac: float = 0.09  # synthetic rehearsal count, fraction of N^tau
    nr_frac: float = 0.01  # replayed node count, fraction of N^tau
    # windows
    t_in: int = 12
    t_out: int = 12
    horizon_steps: tuple[int, ...] = (3, 6, 12)
    # training schedule
    batch_size: int = 128
    epochs_first: int = 50
    epochs_later: int = 10
    pretrain_ae_epochs: int = 150
    dec_epochs: int = 60
    recon_epochs: int = 200
    lr_pretrain: float = 1e-3
    lr_recon: float = 1e-4
    lr_pred: float = 1e-2
    # run
    seed: int = 0
    protocol: str = "tfmoe"
    # data source: exactly one of these in CLI runs
    csv_path: str | None = None
    stream_spec: dict | None = None
    steps_per_day: int = 288  # used when loading CSVs
    calendar: int = 0
    mape_mask: float = 1.0  # |y| at or below this is excluded from MAPE

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        for name in ("ns_frac", "nr_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.m_steps < 1:
            raise ConfigError("m_steps must be >= 1")
        self.horizon_steps = tuple(int(h) for h in self.horizon_steps)
        if any(h < 1 or h > self.t_out for h in self.horizon_steps):
            raise ConfigError("horizon steps must lie in 1..t_out")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["horizon_steps"] = list(self.horizon_steps)
        return d

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    def replace(self, **overrides) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(overrides)
        return ExperimentConfig.from_dict(d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config_file(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(payload)
