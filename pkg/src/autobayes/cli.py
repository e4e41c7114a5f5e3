"""``autobayes`` command line: enumerate, independencies, explore, ensemble.

Exit codes: 0 success, 1 config error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import ensemble as ens
from .bayesball import independency_list
from .data import CsvSchema, DataError, load_csv, split, synthetic_dataset
from .dot import graph_to_dot, spec_to_dot
from .graph import GraphError, enumerate_pruned_graphs, paper_catalog
from .inference import expand_catalog
from .pipeline import HyperParams, ResultRow, explore, load_model, save_model
from .pipeline.train import Metrics
from .runconfig import ConfigError, RunConfig, config_from_dict, load_config

log = logging.getLogger("autobayes")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAINING = 0, 1, 2, 3


class TrainingFailure(RuntimeError):
    pass


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_")


def _catalog(cfg: RunConfig):
    cat = paper_catalog()
    if cfg.catalog:
        try:
            cat = cat.subset(cfg.catalog)
        except (KeyError, GraphError) as exc:
            raise ConfigError(f"unknown catalog entry: {exc}") from exc
    return cat


def _mkdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    return path


def build_dataset(cfg: RunConfig):
    ds_cfg = cfg.dataset
    seed = cfg.seed if ds_cfg.seed is None else ds_cfg.seed
    if ds_cfg.source == "csv":
        schema = CsvSchema(features=ds_cfg.feature_columns, task=ds_cfg.task_column, nuisance=ds_cfg.nuisance_column)
        data = load_csv(ds_cfg.path, schema)
    else:
        try:
            graph = paper_catalog()[ds_cfg.model]
        except KeyError as exc:
            raise ConfigError(f"unknown dataset model {ds_cfg.model!r}") from exc
        try:
            data = synthetic_dataset(graph, seed=seed, n=ds_cfg.n, family=ds_cfg.family, **ds_cfg.params)
        except TypeError as exc:
            raise ConfigError(f"bad dataset params: {exc}") from exc
    if ds_cfg.mask_fraction > 0:
        data = data.with_mask(ds_cfg.mask_fraction, np.random.default_rng([seed, 2]))
    return data


# ------------------------------------------------------------------ commands


def cmd_enumerate(cfg: RunConfig) -> list[Path]:
    out = _mkdir(Path(cfg.out) / "graphs")
    if cfg.exhaustive:
        order = [n for n in paper_catalog()["I"].nodes]  # the full 4-node chain
        order = sorted(order, key=lambda n: "YSZX".index(n.kind))
        graphs = list(enumerate_pruned_graphs(order, cfg.budget))
    else:
        graphs = list(_catalog(cfg))
    written, index = [], []
    for g in graphs:
        path = out / f"{_safe(g.name)}.dot"
        path.write_text(graph_to_dot(g), encoding="utf-8")
        written.append(path)
        index.append({"name": g.name, "file": path.name, "edges": [[a.name, b.name] for a, b in g.edge_list()]})
    (out / "index.json").write_text(json.dumps(index, indent=1) + "\n", encoding="utf-8")
    return written


def cmd_independencies(cfg: RunConfig, model: str, as_json: bool = False) -> str:
    try:
        graph = paper_catalog()[model]
    except KeyError as exc:
        raise ConfigError(f"unknown model {model!r}") from exc
    stmts = independency_list(graph)
    if as_json:
        return json.dumps({"model": model, "independencies": [dict(s.to_json(), text=s.render(graph)) for s in stmts]},
                          indent=1, ensure_ascii=False)
    return "\n".join(s.render(graph) for s in stmts)


def _ensemble_rows(cfg: RunConfig, models: list, train, val, hyper) -> tuple[list[ResultRow], list[dict]]:
    """Meta learners over ``models``; returns table rows plus manifest entries."""
    rows, entries = [], []
    if not cfg.ensemble or len(models) < 2:  # stacking one model adds nothing
        return rows, entries
    for r in ens.stack(models, train, val, cfg.ensemble, cfg.seed, cfg.ensemble_kfold, hyper):
        n_params = r.meta.parameter_count()
        rows.append(ResultRow(r.meta.name, None, Metrics(r.task_accuracy, None, None, n_params), kind="ensemble"))
        entries.append({"model": r.meta.name, "kind": r.kind, "task_accuracy": r.task_accuracy,
                        "worst_group_accuracy": r.worst_group_accuracy, "parameter_count": n_params,
                        "stacking": r.stacking, "_meta": r.meta})
    return rows, entries


def _write_table(out: Path, table, cfg: RunConfig) -> None:
    (out / "results.csv").write_text(table.to_csv(cfg.report_wall_time), encoding="utf-8")


def cmd_explore(cfg: RunConfig) -> dict:
    out = _mkdir(Path(cfg.out))
    graphs_dir, ckpt_dir = _mkdir(out / "graphs"), _mkdir(out / "checkpoints")
    catalog = _catalog(cfg)
    data = build_dataset(cfg)
    train, val = split(data, cfg.val_fraction, cfg.stratify, cfg.seed)
    res = explore(catalog, (train, val), cfg.hyper, seed=cfg.seed, models=cfg.models,
                  strategies=cfg.strategies, variational=tuple(cfg.variational),
                  workers=cfg.workers or os.cpu_count() or 1)
    if not res.specs:
        raise ConfigError("the model filter selected no specs")
    if not cfg.report_wall_time:  # keeps every output file a pure function of config + seed
        for model in res.models.values():
            model.final_metrics.wall_time = 0.0
    for g in catalog:
        (graphs_dir / f"{_safe(g.name)}.dot").write_text(graph_to_dot(g), encoding="utf-8")
    for spec in res.specs:
        (graphs_dir / f"{_safe(spec.run_id)}.spec.dot").write_text(spec_to_dot(spec), encoding="utf-8")
    for run_id, model in res.models.items():
        save_model(model, ckpt_dir / f"{_safe(run_id)}.json")

    ok_models = [res.models[s.run_id] for s in res.specs if s.run_id in res.models]
    rows, entries = _ensemble_rows(cfg, ok_models, train, val, cfg.hyper) if ok_models else ([], [])
    for row, entry in zip(rows, entries):
        res.table.rows.append(row)
        entry.pop("_meta").save(ckpt_dir / f"{_safe(row.model)}.json")
    _write_table(out, res.table, cfg)

    sel = res.table.selected
    manifest = {
        "config": cfg.to_dict(),
        "master_seed": cfg.seed,
        "model_seeds": "SeedSequence([master_seed, crc32(run_id)])",
        "n_train": train.n, "n_val": val.n,
        "models": res.table.to_records(),
        "selected": sel.model if sel else None,
        "ensemble": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, default=str) + "\n", encoding="utf-8")
    if not ok_models:
        raise TrainingFailure("every model failed to train; see results.csv")
    return manifest


def cmd_ensemble(run_dir, kinds: list[str] | None = None) -> dict:
    run_dir = Path(run_dir)
    mpath = run_dir / "manifest.json"
    if not mpath.is_file():
        raise ConfigError(f"{run_dir} is not a run directory (no manifest.json)")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    cfg = config_from_dict(manifest["config"])
    if kinds:
        cfg.ensemble = list(kinds)
    data = build_dataset(cfg)
    train, val = split(data, cfg.val_fraction, cfg.stratify, cfg.seed)
    specs = expand_catalog(paper_catalog())
    models = []
    for rec in manifest["models"]:
        if rec["kind"] != "base" or rec["status"] != "ok":
            continue
        path = run_dir / "checkpoints" / f"{_safe(rec['model'])}.json"
        if not path.is_file():
            raise DataError(f"missing checkpoint {path}")
        models.append(load_model(path, specs))
    if not models:
        raise TrainingFailure("run directory has no trained base models")
    rows, entries = _ensemble_rows(cfg, models, train, val, cfg.hyper)
    for row, entry in zip(rows, entries):
        entry.pop("_meta").save(run_dir / "checkpoints" / f"{_safe(row.model)}.json")
    manifest.setdefault("ensemble_runs", []).append(entries)
    mpath.write_text(json.dumps(manifest, indent=1, default=str) + "\n", encoding="utf-8")
    return {"ensemble": entries}


# ------------------------------------------------------------------ argument handling


def _split_list(text: str | None):
    return None if text is None else [t for t in (p.strip() for p in text.split(",")) if t]


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "models", None):
        names = _split_list(args.models)
        if args.command == "enumerate":
            cfg.catalog = names
        else:
            cfg.models = names
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "epochs", None) is not None:
        cfg.hyper = cfg.hyper.with_(epochs=args.epochs)
    if getattr(args, "dataset_model", None):
        cfg.dataset.model = args.dataset_model
    if getattr(args, "n", None) is not None:
        cfg.dataset.n = args.n
    if getattr(args, "exhaustive", False):
        cfg.exhaustive = True
    if getattr(args, "budget", None) is not None:
        cfg.budget = args.budget
    if getattr(args, "ensemble_kinds", None) is not None:
        cfg.ensemble = _split_list(args.ensemble_kinds)
    return config_from_dict(cfg.to_dict())  # re-validate after overrides


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="autobayes", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML or JSON run config")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="master seed")

    e = sub.add_parser("enumerate", help="write DOT files for catalog graphs")
    common(e)
    e.add_argument("--models", help="comma-separated catalog letters, e.g. E,K")
    e.add_argument("--exhaustive", action="store_true", help="every edge subset of the full chain")
    e.add_argument("--budget", type=int, help="cap on exhaustive graphs")

    i = sub.add_parser("independencies", help="print the independencies of a catalog graph")
    common(i)
    i.add_argument("model")
    i.add_argument("--json", action="store_true")

    x = sub.add_parser("explore", help="train every spec and select the best")
    common(x)
    x.add_argument("--models", help="comma-separated run ids or catalog letters")
    x.add_argument("--workers", type=int)
    x.add_argument("--epochs", type=int)
    x.add_argument("--dataset-model", dest="dataset_model", help="catalog graph to sample data from")
    x.add_argument("--n", type=int, help="synthetic sample count")
    x.add_argument("--ensemble", dest="ensemble_kinds", help="comma-separated meta kinds (mlp,lr) or empty")

    s = sub.add_parser("ensemble", help="train meta learners on an explore run directory")
    s.add_argument("run_dir")
    s.add_argument("--kinds", help="comma-separated meta kinds (default: as configured)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "ensemble":
            result = cmd_ensemble(args.run_dir, _split_list(args.kinds))
            for e in result["ensemble"]:
                print(f"{e['model']}: task_acc={e['task_accuracy']:.4f}")
            return EXIT_OK
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "enumerate":
            paths = cmd_enumerate(cfg)
            print(f"wrote {len(paths)} graphs to {Path(cfg.out) / 'graphs'}")
        elif args.command == "independencies":
            print(cmd_independencies(cfg, args.model, args.json))
        elif args.command == "explore":
            manifest = cmd_explore(cfg)
            print(f"selected {manifest['selected']}; results in {Path(cfg.out) / 'results.csv'}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingFailure as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
