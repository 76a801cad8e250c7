"""TFMoE: mixture-of-experts continual learning for evolving traffic networks.

The package is organised as:

    tfmoe.autodiff   fixed-vocabulary differentiable kernels + Adam
    tfmoe.data       evolving-network data model, CSV/synthetic sources
    tfmoe.cluster    pre-training autoencoder, k-means, DEC, hard groups
    tfmoe.experts    per-expert VAE reconstructors and graph predictors
    tfmoe.continual  per-task training loop and the three forgetting
                     countermeasures (consolidation, sampling, replay)
    tfmoe.bench      metrics, checkpoints, protocols and the CLI

The sklearn-style entry point is ``TFMoEForecaster``.
"""

from .config import ExperimentConfig
from .estimator import TFMoEForecaster

__version__ = "0.1.0"

__all__ = ["ExperimentConfig", "TFMoEForecaster", "__version__"]
