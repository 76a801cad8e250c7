"""Scikit-learn style wrapper around the continual forecasting pipeline.

``TFMoEForecaster`` exposes the whole system through the familiar
fit/predict/score surface so it composes with sklearn tooling
(``get_params``/``set_params``, cloning, grid search over the
hyperparameters). ``fit`` consumes an ordered sequence of task datasets
(or a stream spec) and runs pre-training plus the per-task continual loop;
``predict`` forecasts a task's test windows with the fitted experts.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .bench import compute_metrics, run_protocol
from .config import ExperimentConfig
from .continual import evaluate_task
from .data import StreamSpec, TaskDataset, generate_stream, validate_stream
from .errors import ConfigError


def check_task_sequence(tasks) -> list[TaskDataset]:
    """Validate an ordered task stream before fitting."""
    tasks = list(tasks)
    if not tasks:
        raise ConfigError("need at least one task dataset")
    for i, task in enumerate(tasks, start=1):
        if not isinstance(task, TaskDataset):
            raise ConfigError(f"element {i} is not a TaskDataset")
        if task.task_index != i:
            raise ConfigError(f"task_index {task.task_index} at position {i}; "
                              "tasks must be ordered 1..T")
        task.validate()
    validate_stream(tasks)
    return tasks


class TFMoEForecaster(BaseEstimator):
    """Mixture-of-experts continual forecaster for evolving sensor networks.

    Parameters mirror the experiment configuration; see ExperimentConfig
    for semantics and defaults. After ``fit``, the trained engine state is
    available as ``state_`` and per-task training reports as ``reports_``.
    """

    def __init__(self, k=4, d_z_pretrain=32, d_z=32, d_embed=32, channels=32,
                 m_steps=1, alpha=1e-4, beta=0.1, ns_frac=0.09, nr_frac=0.01,
                 t_in=12, t_out=12, horizon_steps=(3, 6, 12), batch_size=128,
                 epochs_first=50, epochs_later=10, pretrain_ae_epochs=150,
                 dec_epochs=60, recon_epochs=200, lr_pretrain=1e-3,
                 lr_recon=1e-4, lr_pred=1e-2, seed=0, protocol="tfmoe",
                 mape_mask=1.0):
        self.k = k
        self.d_z_pretrain = d_z_pretrain
        self.d_z = d_z
        self.d_embed = d_embed
        self.channels = channels
        self.m_steps = m_steps
        self.alpha = alpha
        self.beta = beta
        self.ns_frac = ns_frac
        self.nr_frac = nr_frac
        self.t_in = t_in
        self.t_out = t_out
        self.horizon_steps = horizon_steps
        self.batch_size = batch_size
        self.epochs_first = epochs_first
        self.epochs_later = epochs_later
        self.pretrain_ae_epochs = pretrain_ae_epochs
        self.dec_epochs = dec_epochs
        self.recon_epochs = recon_epochs
        self.lr_pretrain = lr_pretrain
        self.lr_recon = lr_recon
        self.lr_pred = lr_pred
        self.seed = seed
        self.protocol = protocol
        self.mape_mask = mape_mask

    # -- sklearn surface -------------------------------------------------
    def _config(self) -> ExperimentConfig:
        params = self.get_params()
        params["horizon_steps"] = tuple(params["horizon_steps"])
        return ExperimentConfig(**params)

    def fit(self, X, y=None):
        """Run the continual pipeline over a task stream.

        X may be a list of TaskDataset (ordered by task), a StreamSpec, or
        a stream-spec dict. y is ignored (targets are the future windows of
        the stream itself).
        """
        if isinstance(X, StreamSpec):
            tasks = generate_stream(X)
        elif isinstance(X, dict):
            tasks = generate_stream(StreamSpec.from_dict(X))
        else:
            tasks = check_task_sequence(X)
        result = run_protocol(self._config(), tasks=tasks, keep_state=True)
        self.state_ = result.state
        self.reports_ = result.reports
        self.task_metrics_ = result.metrics
        self.aggregate_mae_ = result.aggregate_mae
        self.tasks_ = tasks
        return self

    def _require_fitted(self):
        if not hasattr(self, "state_"):
            raise ConfigError("forecaster is not fitted; call fit first")

    def predict(self, X=None, task_index: int | None = None, bin_range=None):
        """Denormalized forecasts for a task's test windows.

        X may be a TaskDataset (defaults to the last fitted task). Returns
        an array [windows, nodes, t_out].
        """
        self._require_fitted()
        if X is None:
            task = self.tasks_[-1] if task_index is None else self.tasks_[task_index - 1]
        elif isinstance(X, TaskDataset):
            task = X
        else:
            raise ConfigError("predict expects a TaskDataset (or None for the "
                              "last fitted task)")
        result = evaluate_task(self.state_, task, bin_range=bin_range)
        return result.predictions

    def score(self, X=None, y=None) -> float:
        """Negative aggregate MAE on a task's test split (sklearn: higher
        is better)."""
        self._require_fitted()
        task = X if isinstance(X, TaskDataset) else self.tasks_[-1]
        result = evaluate_task(self.state_, task)
        report = compute_metrics(result.predictions, result.truth,
                                 self._config().horizon_steps,
                                 mape_mask=self.mape_mask)
        return -report.aggregate.mae

    def evaluate(self, task: TaskDataset):
        """Full metrics report for one task's test split."""
        self._require_fitted()
        result = evaluate_task(self.state_, task)
        return compute_metrics(result.predictions, result.truth,
                               self._config().horizon_steps,
                               mape_mask=self.mape_mask)
