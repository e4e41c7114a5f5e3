"""Datasets: ancestral sampling from catalog graphs, CSV ingestion and stratified splits.

The continuous generative family is an artifact choice: discrete nodes (Y, S) are
categorical, each latent is a sum of class-conditional means selected by its discrete
parents plus a linear map of its continuous parents plus Gaussian noise, and X is a
linear map of its latent parents plus per-class offsets for discrete parents plus noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discrete import _sorted_parents
from .graph import BayesianGraph, NodeRole, X, Y, sort_nodes


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    task_labels: np.ndarray
    nuisance_labels: np.ndarray
    nuisance_present: np.ndarray
    n_classes: int
    n_nuisance: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.task_labels = np.asarray(self.task_labels, dtype=np.int64)
        self.nuisance_labels = np.asarray(self.nuisance_labels, dtype=np.int64)
        self.nuisance_present = np.asarray(self.nuisance_present, dtype=bool)
        n = len(self.features)
        if n < 1:
            raise DataError("dataset must have at least one row")
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain NaN or infinite values")
        if len(self.task_labels) != n or len(self.nuisance_labels) != n or len(self.nuisance_present) != n:
            raise DataError("label vectors must match the number of rows")
        if self.task_labels.min() < 0 or self.task_labels.max() >= self.n_classes:
            raise DataError("task label out of range")
        s = self.nuisance_labels[self.nuisance_present]
        if len(s) and (s.min() < 0 or s.max() >= self.n_nuisance):
            raise DataError("nuisance label out of range")
        # masked entries carry -1 so they can never be used as a label by accident
        self.nuisance_labels = np.where(self.nuisance_present, self.nuisance_labels, -1)

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.task_labels[idx], self.nuisance_labels[idx],
                       self.nuisance_present[idx], self.n_classes, self.n_nuisance, dict(self.provenance))

    def with_mask(self, fraction: float, rng: np.random.Generator) -> "Dataset":
        """Copy with a random ``fraction`` of the nuisance labels hidden."""
        if not 0.0 <= fraction <= 1.0:
            raise DataError("mask fraction must lie in [0, 1]")
        hide = rng.random(self.n) < fraction
        present = self.nuisance_present & ~hide
        out = Dataset(self.features, self.task_labels, np.where(present, self.nuisance_labels, 0),
                      present, self.n_classes, self.n_nuisance, dict(self.provenance))
        return out


# ---------------------------------------------------------------- generative sampling


@dataclass
class GenerativeParams:
    """Concrete parameters for a catalog graph.

    ``tables`` maps ``"P->C"`` edge names to arrays: discrete->latent mean tables
    (card x latent_dim), discrete->X offsets (card x d), latent->latent/X linear maps,
    discrete->discrete logit tables (card_P x card_C) and latent->discrete logit maps.
    """

    n_classes: int
    n_nuisance: int
    latent_dim: int
    n_features: int
    noise_scale: float
    y_prior: np.ndarray
    s_prior: np.ndarray
    tables: dict
    seed: int | None = None

    def __post_init__(self):
        for name, prior, k in (("y_prior", self.y_prior, self.n_classes), ("s_prior", self.s_prior, self.n_nuisance)):
            prior = np.asarray(prior, dtype=np.float64)
            if prior.shape != (k,) or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
                raise DataError(f"{name} must be a probability vector of length {k}")
            setattr(self, name, prior)
        if self.noise_scale <= 0:
            raise DataError("noise scale must be positive")

    def card(self, node: NodeRole) -> int:
        return {"Y": self.n_classes, "S": self.n_nuisance, "Z": self.latent_dim, "X": self.n_features}[node.kind]

    @classmethod
    def random(cls, graph: BayesianGraph, seed: int = 0, n_classes: int = 4, n_nuisance: int = 5,
               latent_dim: int = 4, n_features: int = 8, noise_scale: float = 1.0,
               class_scale: float = 2.0, nuisance_scale: float = 3.0, mixing_scale: float = 1.0,
               y_prior=None, s_prior=None) -> "GenerativeParams":
        """Draw edge tables for ``graph``.

        ``class_scale`` and ``nuisance_scale`` are the typical magnitude (in units of
        ``noise_scale``) of per-class means contributed by Y and S parents.
        """
        rng = np.random.default_rng(seed)
        y_prior = np.full(n_classes, 1.0 / n_classes) if y_prior is None else np.asarray(y_prior, float)
        s_prior = np.full(n_nuisance, 1.0 / n_nuisance) if s_prior is None else np.asarray(s_prior, float)
        dims = {"Y": n_classes, "S": n_nuisance, "Z": latent_dim, "X": n_features}
        tables = {}
        for a, b in graph.edge_list():
            key = f"{a.name}->{b.name}"
            da, db = dims[a.kind], dims[b.kind]
            discrete_a = a.kind in ("Y", "S")
            discrete_b = b.kind in ("Y", "S")
            scale = class_scale if a.kind == "Y" else nuisance_scale
            if discrete_a and not discrete_b:
                # per-class vectors of expected norm ~ scale * noise_scale per coordinate block
                width = db
                tables[key] = rng.standard_normal((da, width)) * scale * noise_scale / np.sqrt(max(1, width) / 2.0)
            elif discrete_a and discrete_b:
                tables[key] = rng.standard_normal((da, db)) * scale
            elif not discrete_a and discrete_b:
                tables[key] = rng.standard_normal((da, db)) * mixing_scale
            else:
                tables[key] = rng.standard_normal((da, db)) * mixing_scale / np.sqrt(da)
        return cls(n_classes, n_nuisance, latent_dim, n_features, noise_scale, y_prior, s_prior, tables, seed)


    @classmethod
    def interference(cls, graph: BayesianGraph, seed: int = 0, n_classes: int = 4, n_nuisance: int = 5,
                     latent_dim: int = 4, n_features: int = 8, class_step: float = 1.0,
                     noise_scale: float = 0.25, nuisance_shift: float = 4.0,
                     nuisance_marker: float = 3.0) -> "GenerativeParams":
        """Parameters where S offsets X along the class axis itself.

        Classes sit ``class_step`` apart on one latent axis that maps to a random
        direction ``u`` of X. Nuisance value ``s`` shifts X by ``nuisance_shift *
        class_step * pi(s)`` along ``u`` (``pi`` a seeded permutation) and by
        ``nuisance_marker * pi'(s)`` along an orthogonal direction. Given S the class is
        linear in X; without it the decision regions interleave. Needs edges Y->Z, Z->X,
        S->X; any other edge gets a zero table.
        """
        rng = np.random.default_rng(seed)
        lat = [n for n in graph.latents]
        nuis = [n for n in graph.nuisances]
        z = next((n for n in lat if (Y, n) in graph.edges and (n, X) in graph.edges), None)
        s = next((n for n in nuis if (n, X) in graph.edges), None)
        if z is None or s is None or latent_dim >= n_features:
            raise DataError("interference params need Y->Z->X and S->X with latent_dim < n_features")
        q, _ = np.linalg.qr(rng.standard_normal((n_features, n_features)))
        q = q.T
        dims = {"Y": n_classes, "S": n_nuisance, "Z": latent_dim, "X": n_features}
        tables = {f"{a.name}->{b.name}": np.zeros((dims[a.kind], dims[b.kind])) for a, b in graph.edge_list()}
        means = np.zeros((n_classes, latent_dim))
        means[:, 0] = class_step * np.arange(n_classes)
        tables[f"Y->{z.name}"] = means
        tables[f"{z.name}->X"] = q[:latent_dim].copy()
        shift, marker = rng.permutation(n_nuisance), rng.permutation(n_nuisance)
        tables[f"{s.name}->X"] = (np.outer(nuisance_shift * class_step * shift, q[0])
                                  + np.outer(nuisance_marker * marker, q[latent_dim]))
        return cls(n_classes, n_nuisance, latent_dim, n_features, noise_scale,
                   np.full(n_classes, 1.0 / n_classes), np.full(n_nuisance, 1.0 / n_nuisance), tables, seed)

def _categorical(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random((len(p), 1))
    return np.minimum((p.cumsum(axis=1) < u).sum(axis=1), p.shape[1] - 1)


def sample_from_graph(model: BayesianGraph, params: GenerativeParams, n: int, rng: np.random.Generator,
                      return_latents: bool = False):
    """Ancestral sampling in topological order. Returns a Dataset (and latents if asked)."""
    if n < 1:
        raise DataError("n must be at least 1")
    for key in params.tables:
        a, b = key.split("->")
        if (NodeRole.parse(a), NodeRole.parse(b)) not in model.edges:
            raise DataError(f"params carry table {key} for an edge the graph lacks")
    values: dict[NodeRole, np.ndarray] = {}
    for node in model.topological_order():
        parents = sort_nodes(model.parents(node))
        for p in parents:
            if f"{p.name}->{node.name}" not in params.tables:
                raise DataError(f"missing table for edge {p.name}->{node.name}")
        if node.kind in ("Y", "S"):
            prior = params.y_prior if node.kind == "Y" else params.s_prior
            logits = np.tile(np.log(np.maximum(prior, 1e-300)), (n, 1))
            for p in parents:
                t = params.tables[f"{p.name}->{node.name}"]
                logits = logits + (t[values[p]] if p.kind in ("Y", "S") else values[p] @ t)
            values[node] = _categorical(logits, rng)
        else:
            width = params.card(node)
            acc = np.zeros((n, width))
            for p in parents:
                t = params.tables[f"{p.name}->{node.name}"]
                if t.shape[1] != width:
                    raise DataError(f"table {p.name}->{node.name} has width {t.shape[1]}, expected {width}")
                acc += t[values[p]] if p.kind in ("Y", "S") else values[p] @ t
            values[node] = acc + params.noise_scale * rng.standard_normal((n, width))
    nuis = model.nuisances
    s = values[nuis[0]] if nuis else np.zeros(n, dtype=np.int64)
    ds = Dataset(values[X], values[Y], s, np.ones(n, dtype=bool) if nuis else np.zeros(n, dtype=bool),
                 params.n_classes, params.n_nuisance,
                 {"kind": "synthetic", "model": model.name, "params_seed": params.seed})
    if return_latents:
        return ds, {k: v for k, v in values.items() if k.kind == "Z"}
    return ds


def sample_discrete(model, cpts: dict, cards: dict, n: int, rng: np.random.Generator) -> dict:
    """Discrete-only sampler mode: every node categorical with CPTs from ``discrete.random_cpts``.

    Returns a mapping node -> integer sample vector.
    """
    if n < 1:
        raise DataError("n must be at least 1")
    values = {}
    for node in model.topological_order():
        parents = _sorted_parents(model, node)
        table = cpts[node]
        probs = table[tuple(values[p] for p in parents)] if parents else np.tile(table, (n, 1))
        u = rng.random((n, 1))
        values[node] = np.minimum((probs.cumsum(axis=1) < u).sum(axis=1), cards[node] - 1)
    return values


# ---------------------------------------------------------------- CSV


@dataclass
class CsvSchema:
    features: list[str] | None = None
    task: str = "y"
    nuisance: str | None = "s"
    n_classes: int | None = None
    n_nuisance: int | None = None


def save_csv(dataset: Dataset, path) -> None:
    d = dataset.n_features
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(d)] + ["y", "s"])
        for row, y, s, present in zip(dataset.features, dataset.task_labels,
                                      dataset.nuisance_labels, dataset.nuisance_present):
            w.writerow(["%.17g" % v for v in row] + [int(y), int(s) if present else ""])


def load_csv(path, schema: CsvSchema | None = None) -> Dataset:
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        feat_cols = schema.features or [h for h in header if h.startswith("x") and h[1:].isdigit()]
        missing = [c for c in feat_cols + [schema.task] if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        if not feat_cols:
            raise DataError(f"{path}: no feature columns")
        fi = [header.index(c) for c in feat_cols]
        ti = header.index(schema.task)
        si = header.index(schema.nuisance) if schema.nuisance and schema.nuisance in header else None
        feats, ys, ss, present = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                feats.append([float(row[i]) for i in fi])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
            try:
                ys.append(int(row[ti]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: task label must be an integer") from None
            cell = row[si].strip() if si is not None else ""
            if cell:
                try:
                    ss.append(int(cell))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: nuisance label must be an integer") from None
                present.append(True)
            else:
                ss.append(0)
                present.append(False)
    if not feats:
        raise DataError(f"{path}: no data rows")
    ys = np.array(ys)
    ss = np.array(ss)
    present = np.array(present)
    n_classes = schema.n_classes or int(ys.max()) + 1
    n_nuis = schema.n_nuisance or (int(ss[present].max()) + 1 if present.any() else 1)
    feats = np.array(feats)
    if not np.all(np.isfinite(feats)):
        raise DataError(f"{path}: non-finite feature value")
    return Dataset(feats, ys, ss, present, n_classes, n_nuis, {"kind": "csv", "path": str(path)})


# ---------------------------------------------------------------- splitting


def split(dataset: Dataset, val_fraction: float = 0.2, stratify: str | None = "task", seed: int = 0):
    """Deterministic (optionally stratified) train/validation split.

    ``stratify`` is ``"task"``, ``"nuisance"`` or ``None``. Each stratum sends
    ``round(val_fraction * size)`` rows to validation.
    """
    if not 0.0 < val_fraction < 1.0:
        raise DataError("val_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    if stratify in (None, "none"):
        strata = np.zeros(dataset.n, dtype=np.int64)
    elif stratify in ("task", "ByTask"):
        strata = dataset.task_labels
    elif stratify in ("nuisance", "ByNuisance"):
        if not dataset.nuisance_present.all():
            raise DataError("cannot stratify by nuisance with masked labels")
        strata = dataset.nuisance_labels
    else:
        raise DataError(f"unknown stratification {stratify!r}")
    val_idx = []
    for value in np.unique(strata):
        members = np.flatnonzero(strata == value)
        if stratify not in (None, "none") and len(members) < 2:
            raise DataError(f"stratum {value} has fewer than 2 samples")
        members = members[rng.permutation(len(members))]
        k = int(round(val_fraction * len(members)))
        val_idx.extend(members[:k].tolist())
    val_mask = np.zeros(dataset.n, dtype=bool)
    val_mask[val_idx] = True
    train_idx, val_idx = np.flatnonzero(~val_mask), np.flatnonzero(val_mask)
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise DataError("split left one side empty")
    return dataset.subset(train_idx), dataset.subset(val_idx)


def synthetic_dataset(graph: BayesianGraph, seed: int = 0, n: int = 6000, family: str = "random",
                      **overrides) -> Dataset:
    """Sample ``n`` rows from ``graph`` with parameters from a named family.

    ``family`` is ``"random"`` (``GenerativeParams.random``) or ``"interference"``
    (``GenerativeParams.interference``). Parameters and rows share ``seed``.
    """
    makers = {"random": GenerativeParams.random, "interference": GenerativeParams.interference}
    if family not in makers:
        raise DataError(f"unknown parameter family {family!r}")
    params = makers[family](graph, seed=seed, **overrides)
    ds = sample_from_graph(graph, params, n, np.random.default_rng([seed, 1]))
    ds.provenance = dict(ds.provenance, family=family)
    return ds


# desk-scale configs used by the recovery / ensemble / disentanglement checks
ACCEPTANCE_CONFIGS = {
    "E": {"family": "interference"},
    "A": {"family": "random", "class_scale": 4.0},
    # S offsets in random directions: a latent can drop S without losing the task
    "E-disentangle": {"family": "random"},
}
