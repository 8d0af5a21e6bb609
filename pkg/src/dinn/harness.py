"""Training, evaluation, sweeps and the MC-dropout comparison.

These functions back the command-line subcommands but are plain library
calls; each writes its artifacts only when given an output directory.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import data as D
from .baseline import TrainConfig, mc_dropout_predict, train_real
from .exceptions import DivergenceDetected, IntervalOverflow, ShapeMismatch
from .interval import Interval, mag
from .net import DinnModel, backward, forward, loss, predict, save_model
from .optim import OptimizerConfig, OptimizerState, apply_update, init_model, warm_start
from .tensor import IntervalTensor

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    seed: Optional[int] = None
    dataset: Optional[str] = None  # csv file or a prepared directory
    profile: Optional[str] = None
    hidden_layers: int = 3
    units: int = 500
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epochs: int = 100
    batch_size: int = 64
    out_dir: Optional[str] = None
    init: str = "small-random"  # small-random | warm-start
    init_scale: float = 0.1
    pretrain_epochs: int = 20
    pretrain_lr: float = 1e-2
    reg_kind: str = "none"
    reg_strength: float = 0.0
    test_fraction: float = 0.2
    divergence_factor: Optional[float] = 10.0
    mc_samples: int = 100
    jitter_sigma: float = 0.05
    dropout_p: float = 0.5
    baseline_runs: int = 3
    baseline_lr: float = 1e-3

    def __post_init__(self):
        if isinstance(self.optimizer, dict):
            self.optimizer = OptimizerConfig.from_dict(self.optimizer)
        if self.seed is None:
            raise ValueError("a seed is required for reproducible runs")
        for name in ("hidden_layers", "units", "batch_size", "mc_samples", "baseline_runs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")

    @property
    def sizes(self):
        return [len(D.FEATURES)] + [self.units] * self.hidden_layers + [1]

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["optimizer"] = self.optimizer.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path) -> dict:
    """Raw config mapping from a TOML or JSON file."""
    path = str(path)
    if path.endswith(".toml"):
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


@dataclass
class EvalReport:
    interval_mse: Interval
    midpoint_mse: float
    coverage: float
    mean_width: float
    n: int
    loss_trace: list = field(default_factory=list)  # (epoch, Interval)

    def to_dict(self):
        return {"interval_mse": [self.interval_mse.lo, self.interval_mse.hi],
                "midpoint_mse": self.midpoint_mse, "coverage": self.coverage,
                "mean_width": self.mean_width, "n": self.n,
                "loss_trace": [[e, l.lo, l.hi] for e, l in self.loss_trace]}


@dataclass
class TrainResult:
    model: DinnModel
    trace: list  # (epoch, Interval) per completed epoch
    state: OptimizerState
    diverged: bool = False


# -- data ---------------------------------------------------------------------

def prepare_data(csv_path, profile, test_fraction=0.2, seed=0, out_dir=None):
    """Load, split, normalize and embed; optionally cache to ``out_dir``."""
    table = D.load_csv(csv_path)
    if isinstance(profile, (str, os.PathLike)):
        profile = D.load_profile(profile)
    train, test = D.prepare(table, profile, test_fraction, seed)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        D.save_dataset(train, os.path.join(out_dir, "train.json"))
        D.save_dataset(test, os.path.join(out_dir, "test.json"))
        manifest = {"source": os.path.basename(str(csv_path)), "seed": seed,
                    "test_fraction": test_fraction, "n_total": len(table),
                    "n_train": len(train), "n_test": len(test),
                    "d": train.features.shape[1], "profile": profile.to_dict()}
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    return train, test


def load_prepared(directory):
    return (D.load_dataset(os.path.join(directory, "train.json")),
            D.load_dataset(os.path.join(directory, "test.json")))


# -- training -----------------------------------------------------------------

def build_model(cfg: RunConfig, train_ds: D.IntervalDataset, rng) -> DinnModel:
    sizes = [train_ds.features.shape[1]] + [cfg.units] * cfg.hidden_layers + [1]
    if cfg.init == "warm-start":
        # same scale and penalty as the interval run; L1 keeps the width gain low
        real = train_real(train_ds.features.midpoints(), train_ds.targets.midpoints(),
                          TrainConfig(hidden=tuple(sizes[1:-1]), epochs=cfg.pretrain_epochs,
                                      batch_size=cfg.batch_size, lr=cfg.pretrain_lr,
                                      optimizer="sgd", seed=cfg.seed, init_scale=cfg.init_scale,
                                      reg_kind=cfg.reg_kind, reg_strength=cfg.reg_strength))
        return warm_start(real, cfg.reg_kind, cfg.reg_strength)
    return init_model(sizes, cfg.init_scale, rng, cfg.reg_kind, cfg.reg_strength)


def train_dinn(model: DinnModel, train_ds: D.IntervalDataset, opt: OptimizerConfig,
               epochs: int, batch_size: int, rng, divergence_factor=10.0,
               state: Optional[OptimizerState] = None, first_epoch=0) -> TrainResult:
    """Mini-batch training; the recorded loss per epoch is the mean batch loss.

    Raises :class:`DivergenceDetected` when an epoch loss magnitude exceeds
    ``divergence_factor`` times the smallest one seen so far, or when an
    interval endpoint overflows.  The exception carries the partial trace
    and the last finite model.  ``first_epoch`` resumes the schedule.
    """
    state = state or OptimizerState()
    x, y = train_ds.features, train_ds.targets
    n = x.shape[0]
    trace = []
    best = math.inf
    for epoch in range(first_epoch, first_epoch + epochs):
        order = rng.permutation(n)
        total = Interval(0.0, 0.0)
        batches = 0
        try:
            for s in range(0, n, batch_size):
                idx = order[s:s + batch_size]
                xb, yb = x[idx], y[idx]
                tr = forward(model, xb)
                total = total + loss(tr.prediction, yb, model)
                grads = backward(model, tr, yb)
                model, state = apply_update(model, grads, state, opt, epoch)
                batches += 1
        except (IntervalOverflow, FloatingPointError) as exc:
            raise DivergenceDetected(f"overflow in epoch {epoch}: {exc}", trace, model) from exc
        epoch_loss = total / float(batches)
        trace.append((epoch, epoch_loss))
        size = mag(epoch_loss)
        log.info("epoch %d loss [%.6g, %.6g]", epoch, epoch_loss.lo, epoch_loss.hi)
        best = min(best, size)
        if divergence_factor is not None and size > divergence_factor * best:
            raise DivergenceDetected(
                f"loss magnitude {size:.4g} exceeds {divergence_factor} x running minimum "
                f"{best:.4g} at epoch {epoch}", trace, model)
    return TrainResult(model, trace, state)


def write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss_lo", "loss_hi"])
        for e, l in trace:
            w.writerow([e, repr(l.lo), repr(l.hi)])


def run_training(cfg: RunConfig, train_ds: D.IntervalDataset, out_dir=None) -> TrainResult:
    """Build, train and (optionally) save a DINN.  Never raises on divergence;
    check ``result.diverged`` instead."""
    rng = np.random.default_rng(cfg.seed)
    model = build_model(cfg, train_ds, rng)
    try:
        result = train_dinn(model, train_ds, cfg.optimizer, cfg.epochs, cfg.batch_size, rng,
                            cfg.divergence_factor)
    except DivergenceDetected as exc:
        log.warning("%s", exc)
        result = TrainResult(exc.model, exc.trace, OptimizerState(), diverged=True)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_model(result.model, os.path.join(out_dir, "model.json"))
        write_trace(result.trace, os.path.join(out_dir, "loss_trace.csv"))
        with open(os.path.join(out_dir, "optimizer_state.json"), "w") as fh:
            json.dump(result.state.to_dict(), fh)
    return result


# -- evaluation ---------------------------------------------------------------

def evaluate(model: DinnModel, ds: D.IntervalDataset, loss_trace=None, predictions_path=None):
    """Interval MSE, midpoint MSE, coverage of the ground truth and mean width."""
    if ds.features.shape[1] != model.layers[0].fan_in:
        raise ShapeMismatch("dataset features do not fit the model")
    pred = predict(model, ds.features)
    y = ds.targets
    n = y.shape[0]
    mse = ((pred - y).sqr().sum() / float(n))[()]
    y_mid = y.midpoints()
    mid_mse = float(np.mean((pred.midpoints() - y_mid) ** 2))
    covered = pred.contains(y_mid)
    report = EvalReport(mse, mid_mse, float(covered.mean()), float(pred.widths().mean()), n,
                        list(loss_trace or []))
    if predictions_path is not None:
        write_predictions(pred, y_mid, predictions_path)
    return report


def write_predictions(pred: IntervalTensor, target, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row_id", "pred_lo", "pred_hi", "target"])
        for i, (lo, hi, t) in enumerate(zip(pred.lo, pred.hi, target)):
            w.writerow([i, repr(float(lo)), repr(float(hi)), repr(float(t))])


def coverage_from_csv(path) -> float:
    """Recount coverage from a per-row prediction file."""
    hits = total = 0
    with open(path) as fh:
        for row in csv.DictReader(fh):
            total += 1
            hits += float(row["pred_lo"]) <= float(row["target"]) <= float(row["pred_hi"])
    return hits / total


# -- sweep ----------------------------------------------------------------------

_SWEEPABLE = {"alpha", "momentum", "beta1", "beta2", "epsilon", "clip"}


def _apply_params(cfg: RunConfig, params: dict) -> RunConfig:
    opt_changes = {k: v for k, v in params.items() if k in _SWEEPABLE}
    run_changes = {k: v for k, v in params.items() if k not in _SWEEPABLE}
    opt = dataclasses.replace(cfg.optimizer, **opt_changes)
    return dataclasses.replace(cfg, optimizer=opt, **run_changes)


def sweep(cfg: RunConfig, train_ds: D.IntervalDataset, grid: dict, trials: int, seed: int,
          out_path=None, val_fraction=0.2):
    """Seeded random search over ``grid``; ranks trials by validation midpoint MSE.

    Validation rows are whole ISO weeks held out of ``train_ds``.
    """
    if not grid:
        raise ValueError("grid must not be empty")
    rng = np.random.default_rng(seed)
    fit, val = D.split_grouped(train_ds, val_fraction, seed)
    keys = sorted(grid)
    rows = []
    for trial in range(trials):
        params = {k: grid[k][int(rng.integers(len(grid[k])))] for k in keys}
        tcfg = _apply_params(cfg, params)
        result = run_training(tcfg, fit)
        score = math.inf
        if not result.diverged:
            score = evaluate(result.model, val).midpoint_mse
        rows.append({"trial": trial, **params, "val_midpoint_mse": score,
                     "diverged": result.diverged})
    rows.sort(key=lambda r: (r["val_midpoint_mse"], r["trial"]))
    for rank, r in enumerate(rows, 1):
        r["rank"] = rank
    if out_path is not None:
        cols = ["rank", "trial", *keys, "val_midpoint_mse", "diverged"]
        with open(out_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in rows:
                w.writerow({c: r[c] for c in cols})
    return rows


# -- MC dropout baseline --------------------------------------------------------

def run_baseline(cfg: RunConfig, train_ds: D.IntervalDataset, test_ds: D.IntervalDataset,
                 out_path=None) -> dict:
    """MC dropout with and without Gaussian input jitter.

    Each of ``cfg.baseline_runs`` runs trains one model per variant (jitter
    applied during training and at prediction time when enabled) and records
    the test MSE of the mean prediction.
    """
    x_tr, y_tr = train_ds.features.midpoints(), train_ds.targets.midpoints()
    x_te, y_te = test_ds.features.midpoints(), test_ds.targets.midpoints()
    hidden = (cfg.units,) * cfg.hidden_layers
    out = {}
    for name, sigma in (("mc_dropout_jitter", cfg.jitter_sigma), ("mc_dropout", 0.0)):
        mses, stds = [], []
        for run in range(cfg.baseline_runs):
            seed = cfg.seed + 1000 * run
            model = train_real(x_tr, y_tr, TrainConfig(
                hidden=hidden, epochs=cfg.epochs, batch_size=cfg.batch_size,
                lr=cfg.baseline_lr, dropout_p=cfg.dropout_p, jitter_sigma=sigma, seed=seed))
            mean, std = mc_dropout_predict(model, x_te, cfg.mc_samples, sigma, seed=seed + 1)
            mses.append(float(np.mean((mean - y_te) ** 2)))
            stds.append(float(np.mean(std)))
        out[name] = {"mse_mean": float(np.mean(mses)), "mse_std": float(np.std(mses)),
                     "mse_runs": mses, "mean_predictive_std": float(np.mean(stds)),
                     "jitter_sigma": sigma}
    if out_path is not None:
        with open(out_path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
    return out
