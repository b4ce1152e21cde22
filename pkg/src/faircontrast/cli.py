"""Command-line surface for the pipeline.

Subcommands cover the full flow: cohort synthesis, imputation, generator
training, counterpart construction, classifier training, evaluation, the two
ablation tables, the mixing-weight sweep, random hyperparameter search, the
embedding dump, and artifact verification.  Every failure is reported as one
JSON object on stderr and a non-zero exit code; success always exits 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from .counterparts import (
    CounterpartPolicy,
    NotePolicy,
    build_counterparts,
    load_counterparts,
    save_counterparts,
)
from .data import (
    CohortSpec,
    impute,
    load_cohort,
    load_cohort_archive,
    save_cohort,
    save_cohort_files,
    split_cohort,
    synthesize_cohort,
)
from .errors import ConfigError, FairContrastError, PipelineOrderError, SchemaError
from .gan import GanConfig, GanLossWeights, GateReport, load_gan, save_gan, train_gan
from .harness import (
    TrainConfig,
    alpha_sweep,
    ablate_components,
    ablate_modalities,
    dump_embeddings,
    evaluate,
    format_cell_table,
    format_sweep_table,
    load_embeddings,
    random_search,
    spearman_rank_correlation,
    train,
    train_config_from_dict,
    write_curve_csv,
    write_result,
)
from .model import load_model, save_model

CONFIG_SECTIONS = ("cohort", "impute", "train", "gan", "counterparts", "sweep", "search")
DEFAULT_SWEEP_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


class _Parser(argparse.ArgumentParser):
    """Argument errors follow the same JSON-on-stderr contract as runtime ones."""

    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": message}), file=sys.stderr)
        raise SystemExit(1)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})")
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = sorted(set(payload) - set(CONFIG_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown} (expected {list(CONFIG_SECTIONS)})")
    return payload


def _from_section(cls, payload: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(payload) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r} section: {unknown}")
    return cls(**payload)


def _cohort_spec(cfg: dict) -> tuple[CohortSpec, float]:
    payload = dict(cfg.get("cohort", {}))
    fraction = payload.pop("train_fraction", 0.8)
    return _from_section(CohortSpec, payload, "cohort"), float(fraction)


def _train_config(cfg: dict) -> TrainConfig:
    return train_config_from_dict(dict(cfg.get("train", {})))


def _gan_config(cfg: dict) -> GanConfig:
    payload = dict(cfg.get("gan", {}))
    if "weights" in payload:
        payload["weights"] = _from_section(GanLossWeights, dict(payload["weights"]), "gan.weights")
    return _from_section(GanConfig, payload, "gan")


def _counterpart_policy(cfg: dict) -> CounterpartPolicy:
    payload = dict(cfg.get("counterparts", {}))
    note = _from_section(NotePolicy, dict(payload.pop("note", {})), "counterparts.note")
    exclude = {k: tuple(v) for k, v in dict(payload.pop("exclude", {})).items()}
    if payload:
        raise ConfigError(f"unknown keys in 'counterparts' section: {sorted(payload)}")
    return CounterpartPolicy(note=note, exclude=exclude)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    return path


def _emit(payload: dict) -> int:
    print(json.dumps(payload, sort_keys=True))
    return 0


def _load_counterparts_if_any(args) -> dict | None:
    path = Path(args.counterparts)
    if not path.exists():
        return None
    return load_counterparts(path)


def _model_for_eval(args, cfg: dict, cohort):
    params, model_config, schema = load_model(args.model)
    if schema != cohort.schema:
        raise SchemaError("model was trained against a different cohort schema")
    config = dataclasses.replace(_train_config(cfg), model=model_config)
    return params, config


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_cohort(args) -> int:
    spec, fraction = _cohort_spec(_load_config(args.config))
    cohort = split_cohort(synthesize_cohort(spec, args.seed), fraction, args.seed)
    out = _out_dir(args)
    save_cohort(cohort, out / "cohort.json")
    save_cohort_files(cohort, out)
    return _emit(
        {
            "cohort": str(out / "cohort.json"),
            "records": len(cohort.records),
            "train": len(cohort.train_records()),
            "test": len(cohort.test_records()),
        }
    )


def cmd_impute(args) -> int:
    cfg = _load_config(args.config)
    if args.files is not None:
        base = Path(args.files)
        cohort = load_cohort(
            base / "demographics.csv",
            base / "longitudinal.jsonl",
            base / "notes.jsonl",
            base / "labels.csv",
        )
    else:
        cohort = load_cohort_archive(args.cohort)
    sweeps = int(cfg.get("impute", {}).get("sweeps", 5))
    filled = impute(cohort, sweeps=sweeps)
    out = _out_dir(args)
    save_cohort(filled, out / "cohort.json")
    n_missing = int(sum(r.missing_mask.sum() for r in cohort.records))
    return _emit({"cohort": str(out / "cohort.json"), "imputed_entries": n_missing, "sweeps": sweeps})


def cmd_train_gan(args) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    gan_config = _gan_config(cfg)
    params, gate = train_gan(cohort, gan_config, seed=args.seed)
    out = _out_dir(args)
    save_gan(out / "gan.json", params, gan_config, gate)
    return _emit(
        {
            "gan": str(out / "gan.json"),
            "gate_mmd": gate.mmd,
            "gate_threshold": gate.threshold,
            "gate_passed": gate.passed,
        }
    )


def cmd_gen_counterparts(args) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    params, gan_config, gate_doc = load_gan(args.gan)
    if not gate_doc:
        raise PipelineOrderError("GAN checkpoint carries no quality-gate report; rerun train-gan")
    gate = GateReport(**gate_doc)
    policy = _counterpart_policy(cfg)
    counterparts = build_counterparts(cohort, params, gan_config, gate, policy=policy, seed=args.seed)
    out = _out_dir(args)
    save_counterparts(out / "counterparts.jsonl", counterparts)
    return _emit({"counterparts": str(out / "counterparts.jsonl"), "built": len(counterparts)})


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    config = _train_config(cfg)
    counterparts = _load_counterparts_if_any(args)
    seed = config.seeds[0] if args.seed is None else args.seed
    params, result = train(cohort, counterparts, config, seed=seed)
    out = _out_dir(args)
    save_model(out / "model.json", params, config.model, cohort.schema)
    write_result(result, out / "result.json")
    return _emit(
        {
            "result": str(out / "result.json"),
            "model": str(out / "model.json"),
            "seed": seed,
            "f1": result.report.f1,
            "auroc": result.report.auroc,
            "eo": result.report.eo_mean,
            "eddi_abs": result.report.eddi_abs_mean,
        }
    )


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    params, config = _model_for_eval(args, cfg, cohort)
    report = evaluate(params, config, cohort, split=args.split)
    out = _out_dir(args)
    (out / "report.json").write_text(report.to_json())
    return _emit(
        {
            "report": str(out / "report.json"),
            "split": args.split,
            "n": report.n,
            "f1": report.f1,
            "auroc": report.auroc,
            "eo": report.eo_mean,
            "eddi_abs": report.eddi_abs_mean,
        }
    )


def _run_cell_table(args, runner, label: str) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    table = runner(cohort, _load_counterparts_if_any(args), _train_config(cfg), threads=args.threads)
    out = _out_dir(args)
    _write_json(out / "result.json", table)
    (out / "table.txt").write_text(format_cell_table(table, label=label) + "\n")
    return _emit(
        {
            "result": str(out / "result.json"),
            "table": str(out / "table.txt"),
            "cells": [row["cell"] for row in table["rows"]],
        }
    )


def cmd_ablate_modalities(args) -> int:
    return _run_cell_table(args, ablate_modalities, "modalities")


def cmd_ablate_components(args) -> int:
    return _run_cell_table(args, ablate_components, "components")


def cmd_alpha_sweep(args) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    grid = cfg.get("sweep", {}).get("grid", list(DEFAULT_SWEEP_GRID))
    sweep = alpha_sweep(cohort, _load_counterparts_if_any(args), _train_config(cfg), grid,
                        threads=args.threads)
    medians = [row["summary"]["eddi_abs"]["median"] for row in sweep["rows"]]
    if any(m is None for m in medians):
        rho = None
    else:
        rho = spearman_rank_correlation([row["alpha"] for row in sweep["rows"]], medians)
    sweep = {**sweep, "spearman_alpha_eddi": rho}
    out = _out_dir(args)
    _write_json(out / "result.json", sweep)
    write_curve_csv(sweep, out / "curve.csv")
    (out / "table.txt").write_text(format_sweep_table(sweep) + "\n")
    return _emit(
        {
            "result": str(out / "result.json"),
            "curve": str(out / "curve.csv"),
            "table": str(out / "table.txt"),
            "spearman_alpha_eddi": rho,
        }
    )


def cmd_random_search(args) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    section = cfg.get("search", {})
    outcome = random_search(
        cohort,
        _load_counterparts_if_any(args),
        space=section.get("space"),
        trials=int(section.get("trials", 10)),
        seed=args.seed,
        config=_train_config(cfg),
        threads=args.threads,
    )
    payload = {**outcome, "best": outcome["best"].to_dict()}
    out = _out_dir(args)
    _write_json(out / "result.json", payload)
    return _emit(
        {
            "result": str(out / "result.json"),
            "best_trial": outcome["best_trial"],
            "best_draw": outcome["best_draw"],
            "trials": len(outcome["trials"]),
        }
    )


def cmd_dump_embeddings(args) -> int:
    cfg = _load_config(args.config)
    cohort = load_cohort_archive(args.cohort)
    params, config = _model_for_eval(args, cfg, cohort)
    out = _out_dir(args)
    path = dump_embeddings(params, config, cohort, out / "embeddings.csv")
    return _emit({"embeddings": str(path), "rows": len(cohort.test_records())})


def _detect_kind(path: Path) -> str:
    if path.suffix == ".csv":
        return "embeddings"
    if path.suffix == ".jsonl":
        return "counterparts"
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        raise ConfigError(f"{path}: cannot infer artifact kind; pass --kind explicitly")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: cannot infer artifact kind; pass --kind explicitly")
    if "records" in doc and "schema" in doc:
        return "cohort"
    if "epoch_losses" in doc:
        return "result"
    if "params" in doc and "latent_dim" in doc.get("config", {}):
        return "gan"
    if "params" in doc:
        return "model"
    raise ConfigError(f"{path}: cannot infer artifact kind; pass --kind explicitly")


def cmd_load_check(args) -> int:
    path = Path(args.path)
    kind = args.kind or _detect_kind(path)
    if kind == "cohort":
        cohort = load_cohort_archive(path)
        detail = {"records": len(cohort.records), "train": len(cohort.train_records())}
    elif kind == "counterparts":
        counterparts = load_counterparts(path)
        detail = {"counterparts": len(counterparts)}
    elif kind == "gan":
        _, config, gate = load_gan(path)
        detail = {"latent_dim": config.latent_dim, "gate_passed": bool(gate.get("passed"))}
    elif kind == "model":
        _, config, schema = load_model(path)
        detail = {"fused_dim": config.fused_dim, "note_dim": schema.note_dim}
    elif kind == "embeddings":
        ids, _, coords = load_embeddings(path)
        detail = {"rows": len(ids), "dims": int(coords.shape[1])}
    elif kind == "result":
        doc = json.loads(path.read_text())
        missing = sorted({"config", "seed", "report", "epoch_losses"} - set(doc))
        if missing:
            raise SchemaError(f"{path}: result file lacks keys {missing}")
        train_config_from_dict(doc["config"])  # the stored config must round-trip
        detail = {"seed": doc["seed"], "epochs_recorded": len(doc["epoch_losses"])}
    else:
        raise ConfigError(f"unknown artifact kind {kind!r}")
    return _emit({"path": str(path), "kind": kind, "ok": True, **detail})


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config file (sections: %s)" % ", ".join(CONFIG_SECTIONS))
    shared.add_argument("--seed", type=int, default=None, help="random seed")
    shared.add_argument("--out", default=".", help="output directory")
    shared.add_argument("--threads", type=int, default=1, help="worker threads for independent runs")

    parser = _Parser(prog="faircontrast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, seed_default=None):
        p = sub.add_parser(name, parents=[shared], help=help_text, description=help_text)
        if seed_default is not None:
            p.set_defaults(seed=seed_default)
        p.set_defaults(func=func)
        return p

    add("gen-cohort", cmd_gen_cohort, "synthesize and split a biased cohort", seed_default=0)
    p = add("impute", cmd_impute, "fill missing longitudinal entries")
    p.add_argument("--cohort", default="cohort.json", help="cohort archive to read")
    p.add_argument("--files", default=None, help="directory with the four-file cohort instead of an archive")
    p = add("train-gan", cmd_train_gan, "train the longitudinal generator", seed_default=0)
    p.add_argument("--cohort", default="cohort.json")
    p = add("gen-counterparts", cmd_gen_counterparts, "build demographic counterparts", seed_default=0)
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--gan", default="gan.json")
    p = add("train", cmd_train, "train the fused classifier for one seed")
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--counterparts", default="counterparts.jsonl")
    p = add("evaluate", cmd_evaluate, "score a saved model on one split")
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--model", default="model.json")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p = add("ablate-modalities", cmd_ablate_modalities, "input-modality ablation table")
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--counterparts", default="counterparts.jsonl")
    p = add("ablate-components", cmd_ablate_components, "contrastive/relevance component table")
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--counterparts", default="counterparts.jsonl")
    p = add("alpha-sweep", cmd_alpha_sweep, "mixing-weight sweep with curve output")
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--counterparts", default="counterparts.jsonl")
    p = add("random-search", cmd_random_search, "random hyperparameter search", seed_default=0)
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--counterparts", default="counterparts.jsonl")
    p = add("dump-embeddings", cmd_dump_embeddings, "export adjusted test embeddings as CSV")
    p.add_argument("--cohort", default="cohort.json")
    p.add_argument("--model", default="model.json")
    p = add("load-check", cmd_load_check, "verify an artifact file loads cleanly")
    p.add_argument("path", help="artifact to verify")
    p.add_argument("--kind", choices=("cohort", "counterparts", "gan", "model", "embeddings", "result"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except FairContrastError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "filename", None):
            payload["path"] = str(exc.filename)
        print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
