"""Forecast error metrics on denormalized values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError


@dataclass
class HorizonMetrics:
    mae: float
    rmse: float
    mape: float

    def to_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "mape": self.mape}


@dataclass
class MetricsReport:
    """Per-horizon errors plus their mean across horizons."""

    per_horizon: dict[int, HorizonMetrics]
    aggregate: HorizonMetrics

    def to_dict(self) -> dict:
        return {
            "per_horizon": {str(h): m.to_dict() for h, m in self.per_horizon.items()},
            "aggregate": self.aggregate.to_dict(),
        }


def compute_metrics(pred: np.ndarray, truth: np.ndarray, horizon_steps,
                    mape_mask: float = 1.0) -> MetricsReport:
    """MAE / RMSE / MAPE at each single horizon step (1-indexed).

    MAPE averages |err| / |y| only over targets with |y| > mape_mask, so
    near-zero flows do not blow the percentage up; MAE and RMSE always use
    every entry.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DimensionError(f"pred {pred.shape} vs truth {truth.shape}")
    per_horizon = {}
    for h in horizon_steps:
        p = pred[..., h - 1]
        y = truth[..., h - 1]
        err = p - y
        mae = float(np.abs(err).mean())
        rmse = float(np.sqrt((err * err).mean()))
        keep = np.abs(y) > mape_mask
        if keep.any():
            mape = float(100.0 * (np.abs(err)[keep] / np.abs(y)[keep]).mean())
        else:
            mape = float("nan")
        per_horizon[int(h)] = HorizonMetrics(mae=mae, rmse=rmse, mape=mape)
    agg = HorizonMetrics(
        mae=float(np.mean([m.mae for m in per_horizon.values()])),
        rmse=float(np.mean([m.rmse for m in per_horizon.values()])),
        mape=float(np.mean([m.mape for m in per_horizon.values()])),
    )
    return MetricsReport(per_horizon=per_horizon, aggregate=agg)
