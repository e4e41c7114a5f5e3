"""Stacked generalization over trained base models.

Meta-features are each base model's task and nuisance posteriors, concatenated in
model order. A model without a nuisance head contributes the training nuisance prior.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset
from .nn import functional as F
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import DenseBlock
from .nn.optim import Adam
from .pipeline.network import Batch


class MetaKind(str, enum.Enum):
    LogisticRegression = "lr"
    ShallowMLP = "mlp"


@dataclass(frozen=True)
class MetaHyper:
    epochs: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 32


@dataclass
class PosteriorRecord:
    features: np.ndarray
    task_labels: np.ndarray
    nuisance_labels: np.ndarray
    nuisance_present: np.ndarray
    model_names: list[str]
    n_classes: int
    n_nuisance: int

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def block(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(task posterior, nuisance posterior) of the k-th model."""
        w = self.n_classes + self.n_nuisance
        b = self.features[:, k * w:(k + 1) * w]
        return b[:, :self.n_classes], b[:, self.n_classes:]

    def column_names(self) -> list[str]:
        cols = []
        for name in self.model_names:
            cols += [f"{name}:y{j}" for j in range(self.n_classes)]
            cols += [f"{name}:s{j}" for j in range(self.n_nuisance)]
        return cols

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.column_names() + ["y", "s"])
            for row, y, s, present in zip(self.features, self.task_labels, self.nuisance_labels,
                                          self.nuisance_present):
                w.writerow(["%.17g" % v for v in row] + [int(y), int(s) if present else ""])


def _label_space(model) -> tuple[int, int]:
    return model.network.n_classes, model.network.n_nuisance


def nuisance_prior(data: Dataset) -> np.ndarray:
    present = data.nuisance_labels[data.nuisance_present]
    counts = np.bincount(present, minlength=data.n_nuisance).astype(float) + 1.0
    return counts / counts.sum()


def collect_posteriors(models, data: Dataset, prior: np.ndarray | None = None) -> PosteriorRecord:
    """Eval-mode posteriors of every model on ``data``, stacked column-wise in the given order."""
    models = list(models)
    if not models:
        raise ValueError("no base models")
    n_y, n_s = _label_space(models[0])
    for m in models[1:]:
        if _label_space(m) != (n_y, n_s):
            raise DataError(f"{m.name}: label space {_label_space(m)} differs from {(n_y, n_s)}")
    if data.n_classes > n_y or data.n_nuisance > n_s:
        raise DataError("dataset label space exceeds the models'")
    prior = nuisance_prior(data) if prior is None else np.asarray(prior, float)
    batch = Batch.from_dataset(data)
    blocks = []
    for m in models:
        out = m.network.predict(batch)
        s_post = out["nuisance"] if out["nuisance"] is not None else np.tile(prior, (data.n, 1))
        blocks += [out["task"], s_post]
    return PosteriorRecord(np.concatenate(blocks, axis=1), data.task_labels.copy(), data.nuisance_labels.copy(),
                           data.nuisance_present.copy(), [m.name for m in models], n_y, n_s)


class MetaLearner:
    """Affine softmax (LR) or one ReLU hidden layer twice the input width (MLP)."""

    def __init__(self, kind: MetaKind | str, n_in: int, n_classes: int, rng: np.random.Generator | None = None):
        self.kind = MetaKind(kind)
        widths = [n_in, n_classes] if self.kind is MetaKind.LogisticRegression else [n_in, 2 * n_in, n_classes]
        self.block = DenseBlock(widths, activation="relu", normalization=None, rng=rng, name=f"meta-{self.kind.value}")
        self.n_classes = n_classes

    @property
    def name(self) -> str:
        return "Ensemble-" + ("LR" if self.kind is MetaKind.LogisticRegression else "MLP")

    def parameter_count(self) -> int:
        return self.block.parameter_count()

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return F.softmax(self.block.forward(features, train=False))

    def save(self, path) -> None:
        save_checkpoint(path, self.block.state(), {"kind": self.kind.value, "widths": self.block.widths})

    @classmethod
    def load(cls, path) -> "MetaLearner":
        tensors, meta = load_checkpoint(path)
        widths = meta["widths"]
        m = cls(meta["kind"], widths[0], widths[-1])
        m.block.load_state(tensors)
        return m


def train_meta(records: PosteriorRecord, kind: MetaKind | str = MetaKind.LogisticRegression,
               hyper: MetaHyper | None = None, rng: np.random.Generator | None = None) -> MetaLearner:
    """Fit the meta learner to the task labels by minibatch Adam on cross-entropy."""
    hyper = hyper or MetaHyper()
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(records.task_labels)
    if n == 0:
        raise ValueError("no records to train on")
    if len(np.unique(records.task_labels)) < 2:
        raise ValueError("meta training needs at least two task classes")
    init_rng, order_rng = (np.random.default_rng(s) for s in rng.integers(0, 2 ** 63 - 1, size=2))
    meta = MetaLearner(kind, records.width, records.n_classes, init_rng)
    opt = Adam([meta.block], hyper.learning_rate)
    X, y = records.features, records.task_labels
    for _ in range(hyper.epochs):
        perm = order_rng.permutation(n)
        for lo in range(0, n, hyper.batch_size):
            idx = perm[lo:lo + hyper.batch_size]
            p = F.softmax(meta.block.forward(X[idx], train=True))
            opt.zero_grad()
            meta.block.backward(F.cross_entropy_logits_grad(p, y[idx], len(idx)))
            opt.step()
    return meta


def predict_ensemble(meta: MetaLearner, models, data: Dataset, prior: np.ndarray | None = None) -> np.ndarray:
    """Task posterior of the stacked ensemble; ``prior`` should be the training-split prior."""
    return meta.predict_proba(collect_posteriors(models, data, prior).features)


def group_accuracies(pred: np.ndarray, y: np.ndarray, s: np.ndarray, present: np.ndarray | None = None) -> dict:
    """Task accuracy within each nuisance value."""
    present = np.ones(len(y), bool) if present is None else present
    out = {}
    for g in np.unique(s[present]):
        m = present & (s == g)
        out[int(g)] = float(np.mean(pred[m] == y[m]))
    return out


def worst_group_accuracy(pred: np.ndarray, y: np.ndarray, s: np.ndarray, present: np.ndarray | None = None) -> float:
    return min(group_accuracies(pred, y, s, present).values())


def out_of_fold_posteriors(specs, train: Dataset, hyper, k: int, seed: int, train_fn=None) -> PosteriorRecord:
    """K-fold stacking: each training row gets posteriors from models that never saw it.

    Trains ``k * len(specs)`` extra models; opt-in only.
    """
    from .pipeline.explore import model_rng
    from .pipeline.train import train_model

    train_fn = train_fn or train_model
    if k < 2:
        raise ValueError("k must be at least 2")
    folds = np.random.default_rng([seed, 7]).permutation(train.n) % k
    prior = nuisance_prior(train)
    features = None
    names = [s.run_id for s in specs]
    for f in range(k):
        fit, held = np.flatnonzero(folds != f), np.flatnonzero(folds == f)
        fit_ds, held_ds = train.subset(fit), train.subset(held)
        models = [train_fn(s, fit_ds, held_ds, hyper, model_rng(seed * 1000 + f, s.run_id)) for s in specs]
        rec = collect_posteriors(models, held_ds, prior)
        if features is None:
            features = np.zeros((train.n, rec.width))
        features[held] = rec.features
    return PosteriorRecord(features, train.task_labels.copy(), train.nuisance_labels.copy(),
                           train.nuisance_present.copy(), names, rec.n_classes, rec.n_nuisance)


@dataclass
class StackResult:
    meta: MetaLearner
    kind: str
    task_accuracy: float
    worst_group_accuracy: float | None
    stacking: str
    predictions: np.ndarray


def stack(models, train: Dataset, val: Dataset, kinds, seed: int, kfold: int = 0,
          base_hyper=None) -> list[StackResult]:
    """Fit one meta learner per kind on ``train`` posteriors and score it on ``val``.

    With ``kfold >= 2`` the training features come from out-of-fold retrains
    (needs ``base_hyper``); otherwise the base models' in-sample posteriors are used.
    """
    prior = nuisance_prior(train)
    if kfold >= 2:
        rec_train = out_of_fold_posteriors([m.spec for m in models], train, base_hyper, kfold, seed)
    else:
        rec_train = collect_posteriors(models, train, prior)
    rec_val = collect_posteriors(models, val, prior)
    out = []
    for kind in kinds:
        kind = MetaKind(kind).value
        meta = train_meta(rec_train, kind, rng=np.random.default_rng([seed, 3, 0 if kind == "mlp" else 1]))
        pred = meta.predict_proba(rec_val.features).argmax(axis=1)
        worst = (worst_group_accuracy(pred, val.task_labels, val.nuisance_labels, val.nuisance_present)
                 if val.nuisance_present.any() else None)
        out.append(StackResult(meta, kind, float(np.mean(pred == val.task_labels)), worst,
                               f"{kfold}-fold" if kfold >= 2 else "in-sample", pred))
    return out
