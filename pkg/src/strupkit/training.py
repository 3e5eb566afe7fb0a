"""Full-batch training of SympNets with Adam, and hyperparameter grids."""
from __future__ import annotations

import csv
import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DimensionError, DivergenceError, NumericOverflowError
from .model import SympNetModel, init_model, param_stats
from .systems import SnapshotDataset

log = logging.getLogger(__name__)

GRID_COLUMNS = ["method", "layers", "width_or_degree", "sublayers", "param_count",
                "train_loss", "test_loss", "wall_time_s", "seed"]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50_000
    learning_rate: float = 0.002
    l2_weight: float = 0.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 100

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.l2_weight < 0:
            raise ConfigurationError("l2_weight must be non-negative")
        if self.log_every < 1:
            raise ConfigurationError("log_every must be at least 1")


@dataclass
class TrainReport:
    epochs_logged: list[int] = field(default_factory=list)
    train_history: list[float] = field(default_factory=list)
    test_history: list[float] = field(default_factory=list)
    best_train_loss: float = math.inf
    best_test_loss: float = math.nan
    best_epoch: int = -1
    wall_time_seconds: float = 0.0
    param_stats: tuple = (0.0, 0.0, 0.0)

    @property
    def loss_history(self) -> list[tuple[int, float, float]]:
        return list(zip(self.epochs_logged, self.train_history, self.test_history))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["param_stats"] = list(self.param_stats)
        return d


def _check(model: SympNetModel, data: SnapshotDataset):
    if data.dim_n != model.dim_n:
        raise DimensionError(f"dataset has dim_n={data.dim_n}, model has dim_n={model.dim_n}")


def mse_loss(model: SympNetModel, data: SnapshotDataset, h: float | None = None) -> float:
    """Summed squared error ``sum_i |model(x_i) - y_i|^2``."""
    _check(model, data)
    h = data.h if h is None else h
    r = model.forward(data.x, h) - data.y
    return float(np.sum(r * r))


def loss_and_grad(model: SympNetModel, data: SnapshotDataset, h: float | None = None,
                  l2_weight: float = 0.0) -> tuple[float, np.ndarray]:
    _check(model, data)
    h = data.h if h is None else h
    trace = model.forward_trace(data.x, h)
    r = trace[-1] - data.y
    loss = float(np.sum(r * r))
    _, grad = model.vjp(data.x, h, 2.0 * r, trace=trace)
    if l2_weight:
        theta = model.buffer
        loss += l2_weight * float(theta @ theta)
        grad = grad + 2.0 * l2_weight * theta
    return loss, grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(theta: np.ndarray, state: AdamState, grad: np.ndarray,
              config: TrainConfig) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new parameters and state."""
    if grad.shape != theta.shape or state.m.shape != theta.shape:
        raise DimensionError("parameter, gradient and moment shapes differ")
    t = state.t + 1
    m = config.beta1 * state.m + (1 - config.beta1) * grad
    v = config.beta2 * state.v + (1 - config.beta2) * grad * grad
    m_hat = m / (1 - config.beta1 ** t)
    v_hat = v / (1 - config.beta2 ** t)
    theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return theta, AdamState(m, v, t)


def train(model: SympNetModel, train_set: SnapshotDataset, test_set: SnapshotDataset | None,
          config: TrainConfig = TrainConfig(),
          progress: Optional[Callable[[int, float, float], None]] = None
          ) -> tuple[SympNetModel, TrainReport]:
    """Train a copy of ``model``; returns the parameters with the lowest training loss seen."""
    if test_set is not None and (test_set.dim_n != train_set.dim_n or test_set.h != train_set.h):
        raise DimensionError("train and test sets must share dimension and timestep")
    model = model.copy()
    _check(model, train_set)
    h = train_set.h
    report = TrainReport()
    state = AdamState.zeros(model.num_params)
    best_theta = model.get_flat()
    start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        try:
            loss, grad = loss_and_grad(model, train_set, h, config.l2_weight)
        except NumericOverflowError:
            raise DivergenceError(epoch, math.inf) from None
        if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(epoch, loss)
        if loss < report.best_train_loss:
            report.best_train_loss = loss
            report.best_epoch = epoch - 1        # parameters after epoch-1 updates
            best_theta = model.get_flat()
        theta, state = adam_step(model.buffer, state, grad, config)
        model.set_flat(theta)
        if epoch % config.log_every == 0:
            test = mse_loss(model, test_set, h) if test_set is not None else math.nan
            train_now = mse_loss(model, train_set, h)
            report.epochs_logged.append(epoch)
            report.train_history.append(train_now)
            report.test_history.append(test)
            if progress is not None:
                progress(epoch, train_now, test)
    final = loss_and_grad(model, train_set, h, config.l2_weight)[0]
    if math.isfinite(final) and final < report.best_train_loss:
        report.best_train_loss = final
        report.best_epoch = config.epochs
        best_theta = model.get_flat()
    model.set_flat(best_theta)
    report.wall_time_seconds = time.perf_counter() - start
    if test_set is not None:
        report.best_test_loss = mse_loss(model, test_set, h)
    report.param_stats = param_stats(model)
    model.metadata.update({
        "epochs": config.epochs,
        "best_epoch": report.best_epoch,
        "train_loss": report.best_train_loss,
        "test_loss": report.best_test_loss,
        "wall_time_s": report.wall_time_seconds,
        "train_seed": config.seed,
        "h": h,
    })
    return model, report


# --------------------------------------------------------------------------
# grids


def expand_grid(spec: list[dict]) -> list[tuple[str, dict]]:
    """Cartesian product of each entry's list-valued hyper parameters.

    ``[{"method": "P", "layers": [8, 16], "degree": [2, 3]}]`` gives four runs.
    """
    runs = []
    for entry in spec:
        entry = dict(entry)
        method = entry.pop("method")
        keys = sorted(entry)
        values = [v if isinstance(v, (list, tuple)) else [v] for v in (entry[k] for k in keys)]
        if any(len(v) == 0 for v in values):
            raise ConfigurationError(f"empty hyper-parameter list in grid entry for {method}")
        for combo in itertools.product(*values):
            runs.append((method, dict(zip(keys, combo))))
    if not runs:
        raise ConfigurationError("grid is empty")
    return runs


def _run_one(args):
    method, hyper, train_set, test_set, config, out_dir, index = args
    start = time.perf_counter()
    row = {
        "method": method,
        "layers": hyper.get("layers", ""),
        "width_or_degree": hyper.get("degree", hyper.get("width", "")),
        "sublayers": hyper.get("sublayers", ""),
        "param_count": "",
        "train_loss": math.nan,
        "test_loss": math.nan,
        "wall_time_s": math.nan,
        "seed": config.seed,
    }
    error = None
    try:
        model = init_model(method, train_set.dim_n, hyper, seed=config.seed)
        row["param_count"] = model.num_params
        trained, report = train(model, train_set, test_set, config)
        row["train_loss"] = report.best_train_loss
        row["test_loss"] = report.best_test_loss
        if out_dir is not None:
            tag = "_".join(f"{k}{v}" for k, v in sorted(hyper.items()))
            trained.save(Path(out_dir) / "runs" / f"{index:03d}_{method}_{tag}.json")
    except Exception as exc:  # a failed run is recorded and the grid continues
        error = f"{type(exc).__name__}: {exc}"
    row["wall_time_s"] = time.perf_counter() - start
    return row, error


def grid_workers(n_runs: int) -> int:
    env = os.environ.get("STRUPKIT_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_runs))


def grid_run(spec: list[dict], train_set: SnapshotDataset, test_set: SnapshotDataset,
             config: TrainConfig = TrainConfig(), out_dir=None,
             workers: int | None = None) -> list[dict]:
    """Train every grid combination on shared data; one result row per run.

    Rows are written to ``out_dir/grid.csv`` (if given) in grid order, so the
    table does not depend on the number of workers.
    """
    runs = expand_grid(spec)
    if out_dir is not None:
        (Path(out_dir) / "runs").mkdir(parents=True, exist_ok=True)
    jobs = [(m, hy, train_set, test_set, config, out_dir, i) for i, (m, hy) in enumerate(runs)]
    workers = workers or grid_workers(len(jobs))
    if workers == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    rows = []
    errors = []
    for i, (row, error) in enumerate(results):
        rows.append(row)
        if error:
            log.warning("grid run %d (%s %s) failed: %s", i, runs[i][0], runs[i][1], error)
            errors.append(f"{i},{runs[i][0]},{runs[i][1]},{error}")
    if out_dir is not None:
        write_grid_csv(rows, Path(out_dir) / "grid.csv")
        if errors:
            (Path(out_dir) / "grid_errors.txt").write_text("\n".join(errors) + "\n")
    return rows


def write_grid_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=GRID_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_grid_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
