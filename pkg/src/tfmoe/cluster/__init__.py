from .autoencoder import (
    PretrainAutoencoder,
    encode_latents,
    pretrain_autoencoder,
    reconstruction_loss,
)
from .kmeans import kmeans_init
from .dec import (
    ClusterState,
    cluster_kl,
    dec_train,
    hard_assign,
    soft_assign,
    target_distribution,
)

__all__ = [
    "PretrainAutoencoder",
    "encode_latents",
    "pretrain_autoencoder",
    "reconstruction_loss",
    "kmeans_init",
    "ClusterState",
    "cluster_kl",
    "dec_train",
    "hard_assign",
    "soft_assign",
    "target_distribution",
]
