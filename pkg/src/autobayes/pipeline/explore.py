"""Catalog sweep: train every expanded spec, tabulate metrics and pick the winner."""

from __future__ import annotations

import csv
import io
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, split
from ..inference import expand_catalog
from .config import HyperParams
from .train import Metrics, TrainedModel, train_model

CSV_COLUMNS = ["model", "variational", "task_acc", "nuisance_acc", "recon_db", "params", "wall_time",
               "selected", "status"]


def model_rng(master_seed: int, run_id: str) -> np.random.Generator:
    """Independent stream per model, keyed by name so sweep order does not matter."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), zlib.crc32(run_id.encode())]))


@dataclass
class ResultRow:
    model: str
    variational: bool | None
    metrics: Metrics | None
    status: str = "ok"
    kind: str = "base"
    selected: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "ok" and self.metrics is not None

    def csv_record(self, report_wall_time: bool = False) -> dict:
        def num(v, fmt="{:.6f}"):
            return "" if v is None else fmt.format(v)

        m = self.metrics
        return {
            "model": self.model,
            "variational": "" if self.variational is None else str(self.variational).lower(),
            "task_acc": num(m.task_accuracy if m else None),
            "nuisance_acc": num(m.nuisance_accuracy if m else None),
            "recon_db": num(m.reconstruction_db if m else None, "{:.4f}"),
            "params": "" if m is None else str(m.parameter_count),
            "wall_time": num(m.wall_time if (m and report_wall_time) else None, "{:.3f}"),
            "selected": "true" if self.selected else "false",
            "status": self.status,
        }


@dataclass
class ResultsTable:
    rows: list[ResultRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, name: str) -> ResultRow:
        for r in self.rows:
            if r.model == name:
                return r
        raise KeyError(name)

    @property
    def base_rows(self) -> list[ResultRow]:
        return [r for r in self.rows if r.kind == "base"]

    @property
    def selected(self) -> ResultRow | None:
        return next((r for r in self.rows if r.selected), None)

    def select(self) -> ResultRow | None:
        """Mark the best base row: highest accuracy, then fewer parameters, then name."""
        for r in self.rows:
            r.selected = False
        ok = [r for r in self.base_rows if r.ok]
        if not ok:
            return None
        best = min(ok, key=lambda r: (-r.metrics.task_accuracy, r.metrics.parameter_count, r.model))
        best.selected = True
        return best

    def to_csv(self, report_wall_time: bool = False) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r.csv_record(report_wall_time))
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        out = []
        for r in self.rows:
            out.append({"model": r.model, "kind": r.kind, "variational": r.variational, "status": r.status,
                        "selected": r.selected, "metrics": r.metrics.as_dict() if r.metrics else None})
        return out


@dataclass
class ExploreResult:
    table: ResultsTable
    models: dict[str, TrainedModel]
    specs: list
    train: Dataset
    val: Dataset
    hyper: HyperParams
    seed: int

    @property
    def selected_model(self) -> TrainedModel | None:
        row = self.table.selected
        return self.models.get(row.model) if row else None


def _train_one(args):
    spec, train, val, hyper, seed = args
    try:
        model = train_model(spec, train, val, hyper, model_rng(seed, spec.run_id))
        return spec.run_id, model, "ok"
    except Exception as exc:  # flagged in the table; the sweep goes on
        return spec.run_id, None, f"failed: {type(exc).__name__}: {exc}"


def explore(catalog, dataset: Dataset | tuple[Dataset, Dataset], hyper: HyperParams | None = None, *,
            seed: int = 0, val_fraction: float = 0.2, stratify: str | None = "task",
            models: list[str] | None = None, strategies=None, variational=(False, True),
            workers: int = 1, specs=None) -> ExploreResult:
    """Train each spec expanded from ``catalog`` and select on validation task accuracy.

    ``dataset`` is either one Dataset (split here with ``seed``) or a ``(train, val)`` pair.
    ``models`` restricts the sweep to the given run ids; a bare graph letter keeps all its variants.
    """
    hyper = hyper or HyperParams()
    if isinstance(dataset, tuple):
        train, val = dataset
    else:
        train, val = split(dataset, val_fraction, stratify, seed)
    if specs is None:
        specs = [s for s in expand_catalog(catalog) if s.variational in set(variational)]
        if strategies is not None:
            allowed = {getattr(x, "value", x) for x in strategies}
            specs = [s for s in specs if s.strategy.value in allowed]
    if models:
        wanted = set(models)
        specs = [s for s in specs if s.run_id in wanted or s.generative.name in wanted]
    jobs = [(s, train, val, hyper, seed) for s in specs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]

    table = ResultsTable()
    trained = {}
    for spec, (run_id, model, status) in zip(specs, results):
        metrics = model.final_metrics if model is not None else None
        table.rows.append(ResultRow(run_id, spec.variational, metrics, status))
        if model is not None:
            trained[run_id] = model
    table.select()
    return ExploreResult(table, trained, specs, train, val, hyper, seed)
