"""Experiment harness: training runs, ablations, the mixing-weight sweep,
random hyperparameter search, and embedding export.

Every operation is deterministic given its config and seed.  Model
initialisation and batch order draw from one generator seeded explicitly,
aggregation over seeds is order-independent, and wall-clock time is kept out
of the serialised result so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .counterparts import CounterpartPolicy, CounterpartRecord, NotePolicy
from .data import Cohort, age_bin_label
from .errors import ConfigError, ContractError, TrainingError
from .gan import GanConfig, GanLossWeights
from .losses import LossConfig, contrastive_fair_loss, cross_entropy, total_loss
from .metrics import FairnessReport, _midranks, fairness_report, frame_from_records
from .model import (
    MODALITIES,
    ModalityBatch,
    ModelConfig,
    ModelParams,
    classify,
    dynamic_relevance,
    featurize_counterparts,
    featurize_records,
    forward_fused,
    init_model_params,
)
from .nn import Adam, trainable_tensors
from .tensor import Tensor

EVAL_CHUNK = 256

# Declared hyperparameter search space; draws are uniform over each list.
SEARCH_SPACE: dict[str, list] = {
    "batch_size": [16, 32, 64, 128, 256],
    "learning_rate": [1e-5, 5e-5, 1e-6, 5e-6],
    "epochs": [20, 30, 50],
    "temperature": [0.1, 0.3, 0.5, 0.7],
    "fairness_weight": [0.3, 0.4, 0.5, 0.6, 0.7],
}
# cluster_weight is not part of the declared space but may be swept explicitly.
_SEARCH_KEYS = set(SEARCH_SPACE) | {"cluster_weight"}

VALIDATION_FRACTION = 0.1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    """Knobs of a single training run plus pipeline plumbing.

    The demographic-free baseline is exactly this config with
    ``use_demographics = false``; no separate code path exists for it.
    """

    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    threshold: float = 0.5
    use_demographics: bool = True
    use_longitudinal: bool = True
    use_notes: bool = True
    use_cl: bool = True
    use_dr: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    counterpart_policy: CounterpartPolicy | None = None
    gan: GanConfig | None = None
    out_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be at least 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if not (self.use_demographics or self.use_longitudinal or self.use_notes):
            raise ConfigError("at least one modality must be enabled")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"decision threshold must lie in [0, 1], got {self.threshold}")

    def modalities(self) -> tuple[str, ...]:
        flags = (self.use_demographics, self.use_longitudinal, self.use_notes)
        return tuple(m for m, on in zip(MODALITIES, flags) if on)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        return d


def train_config_from_dict(payload: dict) -> TrainConfig:
    """Rebuild a TrainConfig from its ``to_dict`` form (or a hand-written
    JSON config); unknown keys are rejected to catch typos."""
    payload = dict(payload)
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if "seeds" in payload:
        payload["seeds"] = tuple(payload["seeds"])
    if isinstance(payload.get("model"), dict):
        payload["model"] = ModelConfig(**payload["model"])
    if isinstance(payload.get("loss"), dict):
        payload["loss"] = LossConfig(**payload["loss"])
    if isinstance(payload.get("counterpart_policy"), dict):
        cp = dict(payload["counterpart_policy"])
        if isinstance(cp.get("note"), dict):
            cp["note"] = NotePolicy(**cp["note"])
        payload["counterpart_policy"] = CounterpartPolicy(**cp)
    if isinstance(payload.get("gan"), dict):
        g = dict(payload["gan"])
        if isinstance(g.get("weights"), dict):
            g["weights"] = GanLossWeights(**g["weights"])
        payload["gan"] = GanConfig(**g)
    return TrainConfig(**payload)


# ---------------------------------------------------------------------------
# run results
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    """Outcome of one training run.

    ``wall_clock`` is informational only and deliberately excluded from
    ``to_dict``/``result_json`` so identical (config, seed) runs serialise to
    byte-identical files.
    """

    config: dict
    seed: int
    n_train: int
    n_test: int
    epoch_losses: list[dict]
    report: FairnessReport
    wall_clock: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "epoch_losses": self.epoch_losses,
            "report": self.report.to_dict(),
        }

    def result_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def write_result(result: RunResult, path) -> Path:
    path = Path(path)
    path.write_text(result.result_json())
    return path


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _index_batch(batch: ModalityBatch | None, idx: np.ndarray) -> ModalityBatch | None:
    if batch is None:
        return None
    return ModalityBatch(
        n=len(idx),
        demographics=None if batch.demographics is None else batch.demographics[idx],
        longitudinal=None if batch.longitudinal is None else batch.longitudinal[idx],
        notes=None if batch.notes is None else batch.notes[idx],
        labels=None if batch.labels is None else batch.labels[idx],
    )


def _concat_batches(a: ModalityBatch, b: ModalityBatch) -> ModalityBatch:
    def cat(x, y):
        if x is None or y is None:
            return None
        return np.concatenate([x, y], axis=0)

    return ModalityBatch(
        n=a.n + b.n,
        demographics=cat(a.demographics, b.demographics),
        longitudinal=cat(a.longitudinal, b.longitudinal),
        notes=cat(a.notes, b.notes),
        labels=cat(a.labels, b.labels),
    )


def _gated(e: Tensor, params: ModelParams, use_dr: bool) -> Tensor:
    # with the relevance gate disabled the adjusted embedding is the fused one
    return dynamic_relevance(e, params.gate) if use_dr else e


def train(
    cohort: Cohort,
    counterparts: dict[str, CounterpartRecord] | None,
    config: TrainConfig,
    seed: int = 0,
) -> tuple[ModelParams, RunResult]:
    """Minibatch Adam on the mixed objective alpha*CF + (1-alpha)*CE.

    With ``use_cl = false`` the objective is cross-entropy only and any
    provided counterparts enter as data augmentation (each batch doubled with
    the label-preserving synthetic rows).  With ``use_dr = false`` the gate is
    bypassed.  Evaluation always uses real test records only.
    """
    if config.use_cl and counterparts is None:
        raise ConfigError("contrastive training requires counterparts; none were given")
    records = cohort.train_records()
    if not records:
        raise ContractError("cohort has no training records")

    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    params = init_model_params(rng, cohort.schema, config.model)
    mods = config.modalities()
    real = featurize_records(records, cohort.schema, mods)
    syn = (
        featurize_counterparts(records, counterparts, cohort.schema, mods)
        if counterparts is not None
        else None
    )

    opt = Adam(
        trainable_tensors(params),
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
    )
    alpha = config.loss.fairness_weight
    n = real.n
    epoch_losses: list[dict] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total_sum = cf_sum = ce_sum = 0.0
        saw_cf = False
        for b, lo in enumerate(range(0, n, config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            rb = _index_batch(real, idx)
            if config.use_cl:
                e = forward_fused(params, config.model, rb)
                e_syn = forward_fused(params, config.model, _index_batch(syn, idx))
                e_adj = _gated(e, params, config.use_dr)
                e_adj_syn = _gated(e_syn, params, config.use_dr)
                l_ce = cross_entropy(classify(params, e_adj), rb.labels)
                if alpha > 0.0:
                    l_cf = contrastive_fair_loss(e_adj, e_adj_syn, config.loss)
                    loss = total_loss(l_cf, l_ce, alpha)
                    cf_sum += float(l_cf.data)
                    saw_cf = True
                else:
                    # zero weight: skip the contrastive graph entirely; the
                    # update is bitwise the cross-entropy-only update
                    loss = total_loss(Tensor(0.0), l_ce, 0.0)
            else:
                tb = rb if syn is None else _concat_batches(rb, _index_batch(syn, idx))
                e_adj = _gated(forward_fused(params, config.model, tb), params, config.use_dr)
                l_ce = cross_entropy(classify(params, e_adj), tb.labels)
                loss = l_ce
            if not np.isfinite(loss.data):
                raise TrainingError(f"training loss diverged at epoch {epoch}, batch {b}")
            T.backward(loss)
            opt.step()
            opt.zero_grad()
            total_sum += float(loss.data)
            ce_sum += float(l_ce.data)
        epoch_losses.append(
            {
                "total": total_sum / n,
                "cross_entropy": ce_sum / n,
                "contrastive": cf_sum / n if saw_cf else None,
            }
        )

    report = evaluate(params, config, cohort)
    result = RunResult(
        config=config.to_dict(),
        seed=seed,
        n_train=len(records),
        n_test=len(cohort.test_records()),
        epoch_losses=epoch_losses,
        report=report,
        wall_clock=time.perf_counter() - start,
    )
    return params, result


def _score_records(params: ModelParams, config: TrainConfig, records, schema) -> np.ndarray:
    """Positive-class probabilities, chunked to bound graph size."""
    out = []
    for lo in range(0, len(records), EVAL_CHUNK):
        batch = featurize_records(records[lo : lo + EVAL_CHUNK], schema, config.modalities())
        e_adj = _gated(forward_fused(params, config.model, batch), params, config.use_dr)
        out.append(classify(params, e_adj).data[:, 1])
    return np.concatenate(out)


def embed_records(params: ModelParams, config: TrainConfig, records, schema) -> np.ndarray:
    """Gated fused embeddings for a record list, same code path as training."""
    out = []
    for lo in range(0, len(records), EVAL_CHUNK):
        batch = featurize_records(records[lo : lo + EVAL_CHUNK], schema, config.modalities())
        out.append(_gated(forward_fused(params, config.model, batch), params, config.use_dr).data)
    return np.concatenate(out, axis=0)


def evaluate(params: ModelParams, config: TrainConfig, cohort: Cohort, split: str = "test") -> FairnessReport:
    """Fairness report over one split of real records; counterparts are not
    an input here, so synthetic rows can never reach reported metrics."""
    records = cohort.subset(split)
    if not records:
        raise ContractError(f"cohort has no {split!r} records to evaluate")
    scores = _score_records(params, config, records, cohort.schema)
    return fairness_report(frame_from_records(records, scores, config.threshold))


# ---------------------------------------------------------------------------
# multi-seed aggregation
# ---------------------------------------------------------------------------


def _run_seed(args) -> RunResult:
    cohort, counterparts, config, seed = args
    _, result = train(cohort, counterparts, config, seed)
    return result


def run_seeds(
    cohort: Cohort,
    counterparts: dict[str, CounterpartRecord] | None,
    config: TrainConfig,
    threads: int = 1,
) -> list[RunResult]:
    """One run per config seed; each run owns its parameters, so runs may be
    dispatched to worker threads, and results keep seed order either way."""
    tasks = [(cohort, counterparts, config, s) for s in config.seeds]
    if threads <= 1 or len(tasks) == 1:
        return [_run_seed(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_seed, tasks))


def _per_seed_row(result: RunResult) -> dict:
    r = result.report
    return {
        "seed": result.seed,
        "f1": r.f1,
        "auroc": r.auroc,
        "eo": r.eo_mean,
        "eddi_abs": r.eddi_abs_mean,
        "eddi_signed": r.eddi_signed_mean,
    }


def summarize_runs(results: list[RunResult]) -> dict:
    """Median, mean and population std per metric over seeds; metrics that
    were undefined on every seed summarise to None."""
    rows = [_per_seed_row(r) for r in results]
    out = {}
    for key in ("f1", "auroc", "eo", "eddi_abs", "eddi_signed"):
        vals = [row[key] for row in rows if row[key] is not None]
        if not vals:
            out[key] = {"median": None, "mean": None, "std": None}
        else:
            arr = np.asarray(vals, dtype=float)
            out[key] = {
                "median": float(np.median(arr)),
                "mean": float(np.mean(arr)),
                "std": float(np.std(arr)),
            }
    return out


def _cell_table(cells, cohort, counterparts, config, threads) -> dict:
    rows = []
    for name, cfg in cells:
        results = run_seeds(cohort, counterparts, cfg, threads)
        rows.append(
            {
                "cell": name,
                "flags": {
                    "use_demographics": cfg.use_demographics,
                    "use_longitudinal": cfg.use_longitudinal,
                    "use_notes": cfg.use_notes,
                    "use_cl": cfg.use_cl,
                    "use_dr": cfg.use_dr,
                },
                "seeds": list(cfg.seeds),
                "per_seed": [_per_seed_row(r) for r in results],
                "summary": summarize_runs(results),
            }
        )
    return {"config": config.to_dict(), "rows": rows}


def ablate_modalities(
    cohort: Cohort,
    counterparts: dict[str, CounterpartRecord] | None,
    config: TrainConfig,
    threads: int = 1,
) -> dict:
    """Four input cells with demographics always on: D, D+L, D+N, D+L+N."""
    cells = []
    for name, use_l, use_n in (
        ("D", False, False),
        ("D+L", True, False),
        ("D+N", False, True),
        ("D+L+N", True, True),
    ):
        cells.append(
            (
                name,
                dataclasses.replace(
                    config, use_demographics=True, use_longitudinal=use_l, use_notes=use_n
                ),
            )
        )
    return _cell_table(cells, cohort, counterparts, config, threads)


COMPONENT_CELLS = (
    ("Full w/o CL + DR", False, False),
    ("Full w/o CL", False, True),
    ("Full w/o DR", True, False),
    ("Full", True, True),
)


def ablate_components(
    cohort: Cohort,
    counterparts: dict[str, CounterpartRecord] | None,
    config: TrainConfig,
    threads: int = 1,
) -> dict:
    """The four contrastive/relevance flag pairs, in fixed row order."""
    cells = [
        (name, dataclasses.replace(config, use_cl=cl, use_dr=dr))
        for name, cl, dr in COMPONENT_CELLS
    ]
    return _cell_table(cells, cohort, counterparts, config, threads)


# ---------------------------------------------------------------------------
# mixing-weight sweep
# ---------------------------------------------------------------------------


def alpha_sweep(
    cohort: Cohort,
    counterparts: dict[str, CounterpartRecord] | None,
    config: TrainConfig,
    grid,
    threads: int = 1,
) -> dict:
    """Per-weight medians of F1/EO/EDDI over seeds for a grid of mixing
    weights; feeds the fairness-utility trade-off curve."""
    grid = [float(a) for a in grid]
    if len(grid) < 3:
        raise ConfigError(f"the sweep grid needs at least 3 points, got {len(grid)}")
    for a in grid:
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"sweep grid values must lie in [0, 1], got {a}")
    rows = []
    for a in grid:
        cfg = dataclasses.replace(config, loss=dataclasses.replace(config.loss, fairness_weight=a))
        results = run_seeds(cohort, counterparts, cfg, threads)
        rows.append(
            {
                "alpha": a,
                "per_seed": [_per_seed_row(r) for r in results],
                "summary": summarize_runs(results),
            }
        )
    return {"config": config.to_dict(), "grid": grid, "rows": rows}


CURVE_COLUMNS = (
    "alpha",
    "f1_median", "f1_mean", "f1_std",
    "eo_median", "eo_mean", "eo_std",
    "eddi_abs_median", "eddi_abs_mean", "eddi_abs_std",
)


def write_curve_csv(sweep: dict, path) -> Path:
    """Full-precision CSV of the sweep, one row per grid point."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_COLUMNS)
        for row in sweep["rows"]:
            s = row["summary"]
            cells = [repr(row["alpha"])]
            for metric in ("f1", "eo", "eddi_abs"):
                for stat in ("median", "mean", "std"):
                    v = s[metric][stat]
                    cells.append("" if v is None else repr(v))
            writer.writerow(cells)
    return path


def spearman_rank_correlation(x, y) -> float:
    """Rank correlation with midranks for ties; 0.0 when either side is
    constant (no orderable trend)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractError(f"rank correlation needs two equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ContractError("rank correlation needs at least two points")
    rx = _midranks(x)
    ry = _midranks(y)
    if np.ptp(rx) == 0.0 or np.ptp(ry) == 0.0:
        return 0.0
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


# ---------------------------------------------------------------------------
# random hyperparameter search
# ---------------------------------------------------------------------------


def _apply_draw(config: TrainConfig, draw: dict) -> TrainConfig:
    loss_keys = {k: v for k, v in draw.items() if k in ("temperature", "fairness_weight", "cluster_weight")}
    cfg_keys = {k: v for k, v in draw.items() if k not in loss_keys}
    loss = dataclasses.replace(config.loss, **loss_keys) if loss_keys else config.loss
    return dataclasses.replace(config, loss=loss, **cfg_keys)


def _stratified_carve(records, n_val: int, rng: np.random.Generator) -> set:
    """Pick ``n_val`` validation ids proportionally per label.

    Each label class present in ``records`` keeps at least one pick whenever
    n_val allows, so a small carve cannot silently become single-class (which
    would leave validation AUROC undefined).  Largest remainders absorb the
    rounding slack; the draw is fully determined by ``rng``.
    """
    by_label: dict[int, list] = {}
    for r in records:
        by_label.setdefault(r.label, []).append(r.id)
    labels = sorted(by_label)
    quotas = {}
    remainders = []
    for label in labels:
        exact = n_val * len(by_label[label]) / len(records)
        quotas[label] = int(exact)
        remainders.append((-(exact - int(exact)), label))
    for _, label in sorted(remainders):
        if sum(quotas.values()) == n_val:
            break
        quotas[label] += 1
    if n_val >= len(labels):
        for label in labels:
            if quotas[label] == 0:
                donor = max(quotas, key=lambda l: quotas[l])
                quotas[donor] -= 1
                quotas[label] += 1
    picked: set = set()
    for label in labels:
        ids = by_label[label]
        order = rng.permutation(len(ids))
        picked.update(ids[i] for i in order[: quotas[label]])
    return picked


def random_search(
    cohort: Cohort,
    counterparts: dict[str, CounterpartRecord] | None,
    space: dict | None = None,
    trials: int = 10,
    seed: int = 0,
    config: TrainConfig | None = None,
    threads: int = 1,
) -> dict:
    """Uniform draws from the declared space, scored on a validation carve.

    A tenth of the train split, stratified by label, is held out once per
    search and reused by all trials; selection maximises validation F1 with
    absolute EDDI breaking ties.  The test split is never touched.
    """
    if trials < 1:
        raise ConfigError(f"random search needs at least one trial, got {trials}")
    space = dict(SEARCH_SPACE) if space is None else dict(space)
    if not space:
        raise ConfigError("the search space is empty")
    unknown = sorted(set(space) - _SEARCH_KEYS)
    if unknown:
        raise ConfigError(f"unknown search dimensions: {unknown}")
    for key, options in space.items():
        if not options:
            raise ConfigError(f"search dimension {key!r} has no options")
    base = config if config is not None else TrainConfig()

    train_records = cohort.train_records()
    if len(train_records) < 2:
        raise ContractError("random search needs at least two training records for the validation carve")
    rng = np.random.default_rng(seed)
    n_val = min(max(1, int(round(VALIDATION_FRACTION * len(train_records)))), len(train_records) - 1)
    val_ids = _stratified_carve(train_records, n_val, rng)
    split = {r.id: ("test" if r.id in val_ids else "train") for r in train_records}
    carved = Cohort(records=train_records, schema=cohort.schema, split=split)

    keys = sorted(space)
    trial_rows = []
    best = None
    for t in range(trials):
        draw = {k: space[k][int(rng.integers(len(space[k])))] for k in keys}
        cfg = _apply_draw(base, draw)
        _, result = train(carved, counterparts, cfg, seed=t)
        val_f1 = result.report.f1
        val_eddi = result.report.eddi_abs_mean
        trial_rows.append(
            {
                "trial": t,
                "draw": draw,
                "val_f1": val_f1,
                "val_eddi_abs": val_eddi,
            }
        )
        # higher F1 wins; on an exact F1 tie the smaller |EDDI| wins
        key = (-val_f1, np.inf if val_eddi is None else val_eddi)
        if best is None or key < best[0]:
            best = (key, t, draw, result)

    _, best_trial, best_draw, best_result = best
    return {
        "seed": seed,
        "n_validation": n_val,
        "space": {k: list(v) for k, v in space.items()},
        "trials": trial_rows,
        "best_trial": best_trial,
        "best_draw": best_draw,
        "best": best_result,
    }


# ---------------------------------------------------------------------------
# embedding export
# ---------------------------------------------------------------------------


def dump_embeddings(params: ModelParams, config: TrainConfig, cohort: Cohort, path) -> Path:
    """CSV of id, subgroup labels and gated fused-embedding coordinates for
    every test record, full precision."""
    records = cohort.test_records()
    if not records:
        raise ContractError("cohort has no test records to embed")
    emb = embed_records(params, config, records, cohort.schema)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "gender", "race", "ethnicity", "age_bin", "ses"]
            + [f"e_{j:03d}" for j in range(emb.shape[1])]
        )
        for r, row in zip(records, emb):
            writer.writerow(
                [r.id, r.attrs.gender, r.attrs.race, r.attrs.ethnicity,
                 age_bin_label(r.attrs.age), r.attrs.ses]
                + [repr(float(v)) for v in row]
            )
    return path


def load_embeddings(path) -> tuple[list[str], list[dict], np.ndarray]:
    """Inverse of ``dump_embeddings``: ids, subgroup labels, coordinates."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:6] != ["id", "gender", "race", "ethnicity", "age_bin", "ses"]:
            raise ContractError(f"{path}: not an embedding dump (unexpected header)")
        ids, attrs, coords = [], [], []
        for row in reader:
            if len(row) != len(header):
                raise ContractError(f"{path}: row for {row[0]!r} has {len(row)} fields, expected {len(header)}")
            ids.append(row[0])
            attrs.append(dict(zip(header[1:6], row[1:6])))
            coords.append([float(v) for v in row[6:]])
    return ids, attrs, np.asarray(coords, dtype=float)


# ---------------------------------------------------------------------------
# table rendering
# ---------------------------------------------------------------------------


def _fmt_cell(stats: dict | None) -> str:
    if stats is None or stats["median"] is None:
        return "n/a"
    return f"{100.0 * stats['median']:.1f} ± {100.0 * stats['std']:.1f}"


def format_cell_table(table: dict, label: str = "cell") -> str:
    """Paper-style one-decimal percentage table, median over seeds with std."""
    header = [label, "F1 ↑", "AUROC ↑", "EO ↓", "|EDDI| ↓"]
    body = []
    for row in table["rows"]:
        s = row["summary"]
        body.append(
            [row["cell"], _fmt_cell(s["f1"]), _fmt_cell(s["auroc"]),
             _fmt_cell(s["eo"]), _fmt_cell(s["eddi_abs"])]
        )
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def format_sweep_table(sweep: dict) -> str:
    rows = {"rows": [dict(r, cell=f"{r['alpha']:g}") for r in sweep["rows"]]}
    return format_cell_table(rows, label="weight")
