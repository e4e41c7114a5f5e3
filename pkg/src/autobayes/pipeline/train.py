from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..data import DataError, Dataset
from ..inference import SemiSupervision, semi_supervision_class
from ..nn import functional as F
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.optim import Adam, NonFiniteGradient
from .config import HyperParams
from .network import Batch, FactorNetwork, LossBreakdown


class TrainingError(RuntimeError):
    """Raised when a run produces a non-finite loss or gradient."""


@dataclass
class Metrics:
    task_accuracy: float
    nuisance_accuracy: float | None
    reconstruction_db: float | None
    parameter_count: int
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return dict(task_accuracy=self.task_accuracy, nuisance_accuracy=self.nuisance_accuracy,
                    reconstruction_db=self.reconstruction_db, parameter_count=self.parameter_count,
                    wall_time=self.wall_time)


@dataclass
class EpochRecord:
    epoch: int
    train: LossBreakdown
    val: LossBreakdown
    val_metrics: Metrics
    learning_rate: float


@dataclass
class TrainedModel:
    spec: object
    network: FactorNetwork
    hyper: HyperParams
    history: list[EpochRecord] = field(default_factory=list)
    final_metrics: Metrics | None = None
    best_epoch: int = -1
    gumbel_batches: int = 0

    @property
    def blocks(self) -> dict:
        """Factor -> DenseBlock."""
        return {f: self.network.blocks[f.key] for f in self.spec.factors}

    @property
    def name(self) -> str:
        return self.spec.run_id

    def predict(self, data: Dataset) -> dict:
        return self.network.predict(Batch.from_dataset(data))


def _child_rngs(rng: np.random.Generator, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in rng.integers(0, 2 ** 63 - 1, size=k)]


def _check_compatible(spec, data: Dataset, n_classes: int, n_nuisance: int, n_features: int):
    if data.n < 1:
        raise DataError("empty dataset")
    if data.n_features != n_features:
        raise DataError(f"feature width {data.n_features} != {n_features}")
    if data.task_labels.min() < 0 or data.task_labels.max() >= n_classes:
        raise DataError("task label out of range")


def _batch_loss(net: FactorNetwork, batch: Batch) -> LossBreakdown:
    loss = net.forward(batch, train=False)
    return net.adversary_forward() if net.adversaries else loss


def evaluate(model: TrainedModel | FactorNetwork, data: Dataset) -> Metrics:
    """Eval-mode accuracies, reconstruction level (dB) and parameter count."""
    net = model.network if isinstance(model, TrainedModel) else model
    out = net.predict(Batch.from_dataset(data))
    task_acc = float(np.mean(np.argmax(out["task"], axis=1) == data.task_labels))
    nuis_acc = None
    if out["nuisance"] is not None and data.nuisance_present.any():
        m = data.nuisance_present
        nuis_acc = float(np.mean(np.argmax(out["nuisance"][m], axis=1) == data.nuisance_labels[m]))
    recon = None
    if out["xhat"] is not None:
        recon = F.reconstruction_db(max(F.mse(out["xhat"], data.features), 1e-300))
    return Metrics(task_acc, nuis_acc, recon, net.parameter_count())


def _mean_breakdown(rows: list[LossBreakdown]) -> LossBreakdown:
    if not rows:
        return LossBreakdown()
    keys = rows[0].as_dict().keys()
    return LossBreakdown(**{k: float(np.mean([r.as_dict()[k] for r in rows])) for k in keys})


def train_model(spec, train: Dataset, val: Dataset, hyper: HyperParams | None = None,
                rng: np.random.Generator | None = None) -> TrainedModel:
    """Alternating adversary / main optimization with plateau lr halving and best-epoch restore."""
    hyper = hyper or HyperParams()
    rng = rng if rng is not None else np.random.default_rng(hyper.seed)
    n_classes = max(train.n_classes, val.n_classes)
    n_nuisance = max(train.n_nuisance, val.n_nuisance)
    for d in (train, val):
        _check_compatible(spec, d, n_classes, n_nuisance, train.n_features)
    init_rng, order_rng, noise_rng = _child_rngs(rng, 3)

    net = FactorNetwork(spec, train.n_features, n_classes, n_nuisance, hyper, init_rng)
    main_opt = Adam(net.main_blocks, hyper.learning_rate)
    adv_opt = Adam(net.adversary_blocks, hyper.learning_rate) if net.adversaries else None
    model = TrainedModel(spec, net, hyper)
    val_batch = Batch.from_dataset(val)

    start = time.perf_counter()
    step = 0
    best_acc, best_state = -1.0, None
    best_val_loss, stale = np.inf, 0
    bs = hyper.batch_size
    for epoch in range(hyper.epochs):
        perm = order_rng.permutation(train.n)
        rows = []
        for lo in range(0, train.n, bs):
            idx = perm[lo:lo + bs]
            if len(idx) < 2:  # BatchNorm needs two rows
                continue
            batch = Batch.from_dataset(train, idx)
            tau = F.tau_at(step, hyper.tau_schedule)
            loss = net.forward(batch, train=True, rng=noise_rng, tau=tau)
            if net._state["gumbel"]:
                model.gumbel_batches += 1
            try:
                if adv_opt is not None:
                    for _ in range(hyper.adversary_steps):
                        adv_opt.zero_grad()
                        net.adversary_step_gradients()
                        adv_opt.step()
                    loss = net.adversary_forward()
                if not np.isfinite(loss.total):
                    raise TrainingError(f"{spec.run_id}: non-finite loss at epoch {epoch} step {step}: {loss.as_dict()}")
                main_opt.zero_grad()
                net.backward()
                main_opt.step()
            except NonFiniteGradient as exc:
                raise TrainingError(f"{spec.run_id}: {exc} at epoch {epoch} step {step}") from exc
            rows.append(loss)
            step += 1

        val_loss = _batch_loss(net, val_batch)
        metrics = evaluate(net, val)
        model.history.append(EpochRecord(epoch, _mean_breakdown(rows), val_loss, metrics, main_opt.lr))
        if not np.isfinite(val_loss.total):
            raise TrainingError(f"{spec.run_id}: non-finite validation loss at epoch {epoch}")
        if metrics.task_accuracy > best_acc:
            best_acc, best_state, model.best_epoch = metrics.task_accuracy, net.state(), epoch
        if val_loss.total < best_val_loss - hyper.plateau_tolerance:
            best_val_loss, stale = val_loss.total, 0
        else:
            stale += 1
            if stale >= hyper.plateau_patience:
                main_opt.lr *= 0.5
                if adv_opt is not None:
                    adv_opt.lr *= 0.5
                stale = 0

    if best_state is not None:
        net.load_state(best_state)
    model.final_metrics = evaluate(net, val)
    model.final_metrics.wall_time = time.perf_counter() - start
    return model


def train_semi_supervised(spec, train: Dataset, val: Dataset, hyper: HyperParams | None = None,
                          rng: np.random.Generator | None = None) -> TrainedModel:
    """Train with partially masked nuisance labels.

    Masked rows contribute no nuisance supervision. Where S feeds a later factor, those
    rows use a Gumbel-Softmax draw from the nuisance head instead of the label.
    """
    hyper = hyper or HyperParams()
    cls = semi_supervision_class(spec)
    if cls is SemiSupervision.SAbsent:
        raise ValueError(f"{spec.run_id} has no nuisance head; semi-supervision does not apply")
    if train.n and not train.nuisance_present.any() and hyper.lambda_s > 0:
        raise ValueError("all nuisance labels are masked; nuisance supervision has nothing to fit")
    return train_model(spec, train, val, hyper, rng)


def save_model(model: TrainedModel, path) -> None:
    net = model.network
    meta = {"run_id": model.spec.run_id, "n_features": net.dims[next(n for n in net.dims if n.kind == "X")],
            "n_classes": net.n_classes, "n_nuisance": net.n_nuisance, "hyper": model.hyper.to_dict(),
            "best_epoch": model.best_epoch,
            "final_metrics": model.final_metrics.as_dict() if model.final_metrics else None}
    save_checkpoint(path, net.state(), meta)


def load_model(path, specs) -> TrainedModel:
    """Rebuild a TrainedModel from ``save_model`` output; ``specs`` must contain its run id."""
    from ..inference import find_spec

    tensors, meta = load_checkpoint(path)
    spec = find_spec(specs, meta["run_id"])
    hyper = HyperParams.from_dict(meta["hyper"])
    net = FactorNetwork(spec, meta["n_features"], meta["n_classes"], meta["n_nuisance"], hyper,
                        np.random.default_rng(0))
    net.load_state(tensors)
    fm = meta.get("final_metrics")
    return TrainedModel(spec, net, hyper, final_metrics=Metrics(**fm) if fm else None,
                        best_epoch=meta.get("best_epoch", -1))
