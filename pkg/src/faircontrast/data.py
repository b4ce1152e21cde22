"""Patient cohort data model: types, file ingestion, imputation, synthesis.

On disk a cohort is four files sharing one id space:

  demographics.csv   header ``id,gender,race,ethnicity,age,ses``; categories
                     are strings, age is an integer
  labels.csv         header ``id,label``; label is 0 or 1
  longitudinal.jsonl one object per patient:
                     ``{"id": ..., "values": [[f1..fF] x T], "mask": [[bool..] x T]}``
                     where mask true means the value was observed
  notes.jsonl        one object per patient: ``{"id": ..., "embedding": [d floats]}``

A whole cohort can also round-trip through a single JSON archive with stable
key order, which is the format the CLI passes between stages.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    ContractError,
    DomainError,
    ImputationError,
    IngestionError,
    ParseError,
    SchemaError,
)

CATEGORICAL_ATTRIBUTES = ("gender", "race", "ethnicity", "ses")
SENSITIVE_ATTRIBUTES = ("gender", "race", "ethnicity", "age", "ses")

AGE_BIN_LO = 50
AGE_BIN_HI = 100
AGE_BIN_WIDTH = 10


def age_bin_index(age: int, lo: int = AGE_BIN_LO, hi: int = AGE_BIN_HI, width: int = AGE_BIN_WIDTH) -> int:
    """Index of the ten-year age bin; the last bin is open ended."""
    if age < lo:
        raise DomainError(f"age {age} is below the bin floor {lo}")
    n_bins = (hi - lo) // width
    return min((int(age) - lo) // width, n_bins - 1)


def age_bin_label(age: int, lo: int = AGE_BIN_LO, hi: int = AGE_BIN_HI, width: int = AGE_BIN_WIDTH) -> str:
    idx = age_bin_index(age, lo, hi, width)
    start = lo + idx * width
    if start + width >= hi:
        return f"{start}+"
    return f"{start}-{start + width - 1}"


@dataclass(frozen=True)
class SensitiveAttributes:
    gender: str
    race: str
    ethnicity: str
    age: int
    ses: str

    def categorical(self) -> dict[str, str]:
        return {name: getattr(self, name) for name in CATEGORICAL_ATTRIBUTES}


@dataclass
class PatientRecord:
    id: str
    attrs: SensitiveAttributes
    longitudinal: np.ndarray  # [T, F] float64
    note_embedding: np.ndarray  # [d_n] float64
    label: int
    missing_mask: np.ndarray  # [T, F] bool, True where the value is missing

    def validate(self) -> None:
        if self.longitudinal.shape != self.missing_mask.shape:
            raise SchemaError(
                f"record {self.id}: longitudinal shape {self.longitudinal.shape} "
                f"does not match mask shape {self.missing_mask.shape}"
            )
        if self.label not in (0, 1):
            raise SchemaError(f"record {self.id}: label must be 0 or 1, got {self.label}")
        if self.note_embedding.ndim != 1:
            raise SchemaError(f"record {self.id}: note embedding must be a vector")


@dataclass
class CohortSchema:
    feature_names: list[str]
    vocabularies: dict[str, list[str]]
    note_dim: int
    min_age: int = 0  # 0 means the cohort declares no age floor

    def validate(self) -> None:
        for attr in CATEGORICAL_ATTRIBUTES:
            vocab = self.vocabularies.get(attr)
            if not vocab:
                raise SchemaError(f"schema has no vocabulary for attribute {attr!r}")
            if len(set(vocab)) != len(vocab):
                raise SchemaError(f"vocabulary for {attr!r} has duplicate entries")


@dataclass
class Cohort:
    records: list[PatientRecord]
    schema: CohortSchema
    split: dict[str, str] = field(default_factory=dict)  # id -> "train" | "test"

    def __post_init__(self):
        if not self.split:
            self.split = {r.id: "train" for r in self.records}

    def validate(self) -> None:
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaError(f"duplicate record ids: {dupes}")
        self.schema.validate()
        if set(self.split) != set(ids):
            raise SchemaError("split assignment does not cover exactly the record ids")
        bad = sorted(v for v in set(self.split.values()) if v not in ("train", "test"))
        if bad:
            raise SchemaError(f"unknown split labels: {bad}")
        shapes = {r.longitudinal.shape for r in self.records}
        if len(shapes) > 1:
            raise SchemaError(f"records disagree on longitudinal shape: {sorted(shapes)}")
        for r in self.records:
            r.validate()
            if r.note_embedding.shape[0] != self.schema.note_dim:
                raise SchemaError(
                    f"record {r.id}: note embedding dim {r.note_embedding.shape[0]} "
                    f"differs from schema dim {self.schema.note_dim}"
                )
            for attr, value in r.attrs.categorical().items():
                if value not in self.schema.vocabularies[attr]:
                    raise SchemaError(f"record {r.id}: {attr}={value!r} is not in the vocabulary")
            if self.schema.min_age and r.attrs.age < self.schema.min_age:
                raise SchemaError(
                    f"record {r.id}: age {r.attrs.age} is below the cohort minimum {self.schema.min_age}"
                )

    def record(self, record_id: str) -> PatientRecord:
        for r in self.records:
            if r.id == record_id:
                return r
        raise ContractError(f"no record with id {record_id!r}")

    def subset(self, label: str) -> list[PatientRecord]:
        return [r for r in self.records if self.split[r.id] == label]

    def train_records(self) -> list[PatientRecord]:
        return self.subset("train")

    def test_records(self) -> list[PatientRecord]:
        return self.subset("test")


# ---------------------------------------------------------------------------
# four-file ingestion
# ---------------------------------------------------------------------------


def _read_demographics(path) -> dict[str, SensitiveAttributes]:
    expected = ["id", "gender", "race", "ethnicity", "age", "ses"]
    out: dict[str, SensitiveAttributes] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty demographics file", line=1)
        if header != expected:
            raise SchemaError(f"{path}: header {header} does not match {expected}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ParseError(f"{path}: expected {len(expected)} fields, got {len(row)}", line=line_no)
            rec_id, gender, race, ethnicity, age_s, ses = row
            try:
                age = int(age_s)
            except ValueError:
                raise ParseError(f"{path}: age {age_s!r} is not an integer", line=line_no)
            if rec_id in out:
                raise ParseError(f"{path}: duplicate id {rec_id!r}", line=line_no)
            out[rec_id] = SensitiveAttributes(gender=gender, race=race, ethnicity=ethnicity, age=age, ses=ses)
    return out


def _read_labels(path) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty labels file", line=1)
        if header != ["id", "label"]:
            raise SchemaError(f"{path}: header {header} does not match ['id', 'label']")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ParseError(f"{path}: expected 2 fields, got {len(row)}", line=line_no)
            rec_id, label_s = row
            if label_s not in ("0", "1"):
                raise ParseError(f"{path}: label must be 0 or 1, got {label_s!r}", line=line_no)
            if rec_id in out:
                raise ParseError(f"{path}: duplicate id {rec_id!r}", line=line_no)
            out[rec_id] = int(label_s)
    return out


def _read_jsonl(path) -> list[tuple[int, dict]]:
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: invalid JSON ({exc.msg})", line=line_no)
            if not isinstance(obj, dict) or "id" not in obj:
                raise ParseError(f"{path}: each line must be an object with an 'id'", line=line_no)
            rows.append((line_no, obj))
    return rows


def _read_longitudinal(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    shape = None
    for line_no, obj in _read_jsonl(path):
        if "values" not in obj or "mask" not in obj:
            raise ParseError(f"{path}: missing 'values' or 'mask'", line=line_no)
        try:
            values = np.asarray(obj["values"], dtype=np.float64)
            observed = np.asarray(obj["mask"], dtype=bool)
        except (ValueError, TypeError):
            raise ParseError(f"{path}: values/mask are not rectangular arrays", line=line_no)
        if values.ndim != 2 or observed.shape != values.shape:
            raise SchemaError(
                f"{path} line {line_no}: values shape {values.shape} and mask shape "
                f"{observed.shape} must be equal [T, F] matrices"
            )
        if shape is None:
            shape = values.shape
        elif values.shape != shape:
            raise SchemaError(
                f"{path} line {line_no}: shape {values.shape} differs from first record's {shape}"
            )
        if obj["id"] in out:
            raise ParseError(f"{path}: duplicate id {obj['id']!r}", line=line_no)
        # mask true means observed in the file; internally we track missing
        out[obj["id"]] = (values, ~observed)
    return out


def _read_notes(path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    dim = None
    for line_no, obj in _read_jsonl(path):
        if "embedding" not in obj:
            raise ParseError(f"{path}: missing 'embedding'", line=line_no)
        try:
            emb = np.asarray(obj["embedding"], dtype=np.float64)
        except (ValueError, TypeError):
            raise ParseError(f"{path}: embedding is not a flat list of numbers", line=line_no)
        if emb.ndim != 1:
            raise SchemaError(f"{path} line {line_no}: embedding must be a flat vector")
        if dim is None:
            dim = emb.shape[0]
        elif emb.shape[0] != dim:
            raise SchemaError(
                f"{path} line {line_no}: embedding dim {emb.shape[0]} differs from first record's {dim}"
            )
        if obj["id"] in out:
            raise ParseError(f"{path}: duplicate id {obj['id']!r}", line=line_no)
        out[obj["id"]] = emb
    return out


def load_cohort(demographics_path, longitudinal_path, notes_path, labels_path) -> Cohort:
    """Ingest the four-file format into a validated Cohort.

    Vocabularies are derived as the sorted distinct category strings.  All
    four files must cover exactly the same id set; any orphan ids are listed
    in the raised IngestionError.
    """
    demo = _read_demographics(demographics_path)
    labels = _read_labels(labels_path)
    longi = _read_longitudinal(longitudinal_path)
    notes = _read_notes(notes_path)

    sources = {
        "demographics": set(demo),
        "labels": set(labels),
        "longitudinal": set(longi),
        "notes": set(notes),
    }
    common = set.intersection(*sources.values())
    orphans = {name: sorted(ids - common) for name, ids in sources.items() if ids - common}
    if orphans:
        detail = "; ".join(f"{name} only: {ids}" for name, ids in sorted(orphans.items()))
        raise IngestionError(f"id mismatch across input files: {detail}")

    ids = sorted(common)
    if not ids:
        raise IngestionError("input files contain no records")
    vocabularies = {
        attr: sorted({getattr(demo[i], attr) for i in ids}) for attr in CATEGORICAL_ATTRIBUTES
    }
    note_dim = notes[ids[0]].shape[0]
    n_features = longi[ids[0]][0].shape[1]
    schema = CohortSchema(
        feature_names=[f"feature_{j:02d}" for j in range(n_features)],
        vocabularies=vocabularies,
        note_dim=note_dim,
    )
    records = [
        PatientRecord(
            id=i,
            attrs=demo[i],
            longitudinal=longi[i][0],
            note_embedding=notes[i],
            label=labels[i],
            missing_mask=longi[i][1],
        )
        for i in ids
    ]
    cohort = Cohort(records=records, schema=schema)
    cohort.validate()
    return cohort


# ---------------------------------------------------------------------------
# single-file archive
# ---------------------------------------------------------------------------


def cohort_to_dict(cohort: Cohort) -> dict:
    return {
        "schema": {
            "feature_names": cohort.schema.feature_names,
            "vocabularies": cohort.schema.vocabularies,
            "note_dim": cohort.schema.note_dim,
            "min_age": cohort.schema.min_age,
        },
        "records": [
            {
                "id": r.id,
                "gender": r.attrs.gender,
                "race": r.attrs.race,
                "ethnicity": r.attrs.ethnicity,
                "age": r.attrs.age,
                "ses": r.attrs.ses,
                "label": r.label,
                "values": r.longitudinal.tolist(),
                "mask": (~r.missing_mask).tolist(),
                "embedding": r.note_embedding.tolist(),
            }
            for r in cohort.records
        ],
        "split": {i: cohort.split[i] for i in sorted(cohort.split)},
    }


def save_cohort(cohort: Cohort, path) -> None:
    """Write the single-JSON archive.  Key order is stable, so the same cohort
    always produces identical bytes."""
    doc = cohort_to_dict(cohort)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_cohort_archive(path) -> Cohort:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON archive ({exc.msg})", line=exc.lineno)
    try:
        schema = CohortSchema(
            feature_names=list(doc["schema"]["feature_names"]),
            vocabularies={k: list(v) for k, v in doc["schema"]["vocabularies"].items()},
            note_dim=int(doc["schema"]["note_dim"]),
            min_age=int(doc["schema"].get("min_age", 0)),
        )
        records = [
            PatientRecord(
                id=entry["id"],
                attrs=SensitiveAttributes(
                    gender=entry["gender"],
                    race=entry["race"],
                    ethnicity=entry["ethnicity"],
                    age=int(entry["age"]),
                    ses=entry["ses"],
                ),
                longitudinal=np.asarray(entry["values"], dtype=np.float64),
                note_embedding=np.asarray(entry["embedding"], dtype=np.float64),
                label=int(entry["label"]),
                missing_mask=~np.asarray(entry["mask"], dtype=bool),
            )
            for entry in doc["records"]
        ]
        split = dict(doc["split"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed cohort archive: {exc}")
    cohort = Cohort(records=records, schema=schema, split=split)
    cohort.validate()
    return cohort


def save_cohort_files(cohort: Cohort, out_dir) -> dict[str, Path]:
    """Write the four-file representation next to each other in ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "demographics": out_dir / "demographics.csv",
        "labels": out_dir / "labels.csv",
        "longitudinal": out_dir / "longitudinal.jsonl",
        "notes": out_dir / "notes.jsonl",
    }
    with open(paths["demographics"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "gender", "race", "ethnicity", "age", "ses"])
        for r in cohort.records:
            a = r.attrs
            writer.writerow([r.id, a.gender, a.race, a.ethnicity, a.age, a.ses])
    with open(paths["labels"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"])
        for r in cohort.records:
            writer.writerow([r.id, r.label])
    with open(paths["longitudinal"], "w") as fh:
        for r in cohort.records:
            fh.write(
                json.dumps(
                    {"id": r.id, "values": r.longitudinal.tolist(), "mask": (~r.missing_mask).tolist()},
                    sort_keys=True,
                )
                + "\n"
            )
    with open(paths["notes"], "w") as fh:
        for r in cohort.records:
            fh.write(json.dumps({"id": r.id, "embedding": r.note_embedding.tolist()}, sort_keys=True) + "\n")
    return paths


# ---------------------------------------------------------------------------
# imputation
# ---------------------------------------------------------------------------


def impute(cohort: Cohort, sweeps: int = 5) -> Cohort:
    """Fill missing longitudinal entries by chained linear regression.

    Each (record, time step) pair is treated as one row of F features.
    Missing entries start at their column mean; each sweep then revisits every
    feature in order and replaces its missing entries with the prediction of
    an intercept-plus-least-squares regression on the other features, fitted
    on the rows where the feature was observed.  ``sweeps=0`` leaves the mean
    initialisation.  Observed values are never touched.  The procedure is
    deterministic: no randomness enters at any point.
    """
    if sweeps < 0:
        raise ContractError(f"sweeps must be >= 0, got {sweeps}")
    if not cohort.records:
        raise ContractError("cannot impute an empty cohort")
    if not any(r.missing_mask.any() for r in cohort.records):
        return cohort

    t_len, n_feat = cohort.records[0].longitudinal.shape
    stacked = np.concatenate([r.longitudinal for r in cohort.records], axis=0)
    missing = np.concatenate([r.missing_mask for r in cohort.records], axis=0)

    observed_counts = (~missing).sum(axis=0)
    for j, count in enumerate(observed_counts):
        if count == 0:
            name = cohort.schema.feature_names[j]
            raise ImputationError(f"feature {name!r} has no observed values anywhere in the cohort")

    work = stacked.copy()
    for j in range(n_feat):
        col_mean = stacked[~missing[:, j], j].mean()
        work[missing[:, j], j] = col_mean

    if n_feat > 1:
        for _ in range(sweeps):
            for j in range(n_feat):
                miss_rows = missing[:, j]
                if not miss_rows.any():
                    continue
                others = [k for k in range(n_feat) if k != j]
                design = np.column_stack([np.ones(len(work)), work[:, others]])
                fit_rows = ~miss_rows
                coef, *_ = np.linalg.lstsq(design[fit_rows], stacked[fit_rows, j], rcond=None)
                work[miss_rows, j] = design[miss_rows] @ coef

    if not np.all(np.isfinite(work)):
        raise ImputationError("imputation produced non-finite values")

    records = []
    offset = 0
    for r in cohort.records:
        block = work[offset : offset + t_len]
        offset += t_len
        filled = r.longitudinal.copy()
        filled[r.missing_mask] = block[r.missing_mask]
        records.append(replace(r, longitudinal=filled))
    return Cohort(records=records, schema=cohort.schema, split=dict(cohort.split))


# ---------------------------------------------------------------------------
# synthetic cohort generation
# ---------------------------------------------------------------------------


def default_vocabularies() -> dict[str, list[str]]:
    # first entry of the bias attribute's vocabulary is the disadvantaged group
    return {
        "gender": ["female", "male"],
        "race": ["black", "white", "asian", "other"],
        "ethnicity": ["hispanic", "nonhispanic"],
        "ses": ["medicaid", "private", "medicare"],
    }


@dataclass
class CohortSpec:
    """Knobs of the synthetic biased cohort generator.

    A latent severity drives both the longitudinal vitals and the outcome, so
    the label is learnable from non-demographic signal.  ``bias_strength``
    shifts the outcome rate of the disadvantaged group (the first vocabulary
    entry of ``bias_attribute``) and ``note_leakage`` mixes a group-indicating
    direction into the note embeddings.
    """

    n: int = 2000
    time_steps: int = 24
    features: int = 8
    note_dim: int = 64
    vocabularies: dict[str, list[str]] = field(default_factory=default_vocabularies)
    min_age: int = 50
    max_age: int = 100
    bias_attribute: str = "race"
    bias_strength: float = 0.0
    note_leakage: float = 0.0
    class_balance: float = 0.5
    ar_coef: float = 0.8
    severity_coupling: float = 0.5
    noise_scale: float = 0.5
    label_slope: float = 2.0
    note_signal: float = 1.0
    note_noise: float = 0.3
    missing_rate: float = 0.0

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"cohort size must be positive, got {self.n}")
        if self.time_steps < 1 or self.features < 1 or self.note_dim < 1:
            raise ConfigError("time_steps, features and note_dim must all be positive")
        if not 0.0 <= self.bias_strength <= 1.0:
            raise ConfigError(f"bias_strength must lie in [0, 1], got {self.bias_strength}")
        if not 0.0 <= self.note_leakage <= 1.0:
            raise ConfigError(f"note_leakage must lie in [0, 1], got {self.note_leakage}")
        if not 0.0 < self.class_balance < 1.0:
            raise ConfigError(f"class_balance must lie in (0, 1), got {self.class_balance}")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError(f"missing_rate must lie in [0, 1), got {self.missing_rate}")
        if self.min_age >= self.max_age:
            raise ConfigError("min_age must be below max_age")
        if self.bias_attribute not in self.vocabularies:
            raise ConfigError(f"bias_attribute {self.bias_attribute!r} has no vocabulary")
        for attr in CATEGORICAL_ATTRIBUTES:
            if not self.vocabularies.get(attr):
                raise ConfigError(f"vocabulary for {attr!r} is missing or empty")


def synthesize_cohort(spec: CohortSpec, seed: int) -> Cohort:
    """Generate a reproducible biased cohort.

    The draw order is fixed (severity, demographics, longitudinal noise,
    labels, note projections, note noise, missingness), and all randomness
    comes from one PCG64 generator seeded with ``seed``, so a given
    (spec, seed) pair yields the same bytes on every platform.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    n, t_len, n_feat = spec.n, spec.time_steps, spec.features

    severity = rng.standard_normal(n)

    attr_idx = {
        attr: rng.integers(0, len(spec.vocabularies[attr]), size=n)
        for attr in CATEGORICAL_ATTRIBUTES
    }
    ages = rng.integers(spec.min_age, spec.max_age, size=n)

    noise = rng.standard_normal((n, t_len, n_feat)) * spec.noise_scale
    drive = spec.severity_coupling * severity[:, None]
    longitudinal = np.empty((n, t_len, n_feat))
    longitudinal[:, 0, :] = drive + noise[:, 0, :]
    for t in range(1, t_len):
        longitudinal[:, t, :] = spec.ar_coef * longitudinal[:, t - 1, :] + drive + noise[:, t, :]

    bias_vocab = spec.vocabularies[spec.bias_attribute]
    disadvantaged = attr_idx[spec.bias_attribute] == 0
    intercept = float(np.log(spec.class_balance / (1.0 - spec.class_balance)))
    logits = spec.label_slope * severity + intercept + spec.bias_strength * disadvantaged
    label_p = 1.0 / (1.0 + np.exp(-logits))
    labels = (rng.random(n) < label_p).astype(int)

    # unit-norm projections keep note_signal and note_leakage in amplitude
    # units that do not drift with note_dim
    h_direction = rng.standard_normal(spec.note_dim)
    h_direction /= np.linalg.norm(h_direction)
    group_directions = rng.standard_normal((spec.note_dim, len(bias_vocab)))
    group_directions /= np.linalg.norm(group_directions, axis=0, keepdims=True)
    notes = (
        spec.note_signal * severity[:, None] * h_direction[None, :]
        + spec.note_leakage * group_directions[:, attr_idx[spec.bias_attribute]].T
        + rng.standard_normal((n, spec.note_dim)) * spec.note_noise
    )

    if spec.missing_rate > 0.0:
        missing = rng.random((n, t_len, n_feat)) < spec.missing_rate
    else:
        missing = np.zeros((n, t_len, n_feat), dtype=bool)

    schema = CohortSchema(
        feature_names=[f"feature_{j:02d}" for j in range(n_feat)],
        vocabularies={k: list(v) for k, v in spec.vocabularies.items()},
        note_dim=spec.note_dim,
        min_age=spec.min_age,
    )
    records = [
        PatientRecord(
            id=f"p{i:05d}",
            attrs=SensitiveAttributes(
                gender=spec.vocabularies["gender"][attr_idx["gender"][i]],
                race=spec.vocabularies["race"][attr_idx["race"][i]],
                ethnicity=spec.vocabularies["ethnicity"][attr_idx["ethnicity"][i]],
                age=int(ages[i]),
                ses=spec.vocabularies["ses"][attr_idx["ses"][i]],
            ),
            longitudinal=longitudinal[i],
            note_embedding=notes[i],
            label=int(labels[i]),
            missing_mask=missing[i],
        )
        for i in range(n)
    ]
    cohort = Cohort(records=records, schema=schema)
    cohort.validate()
    return cohort


def split_cohort(cohort: Cohort, train_fraction: float, seed: int) -> Cohort:
    """Reassign train/test membership uniformly at random.

    The train side gets round(n * fraction) records (clamped so neither side
    is empty), which keeps the realised proportion within one record of the
    target.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie strictly between 0 and 1, got {train_fraction}")
    n = len(cohort.records)
    if n < 2:
        raise ContractError("splitting needs at least two records")
    n_train = int(round(n * train_fraction))
    n_train = min(max(n_train, 1), n - 1)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    split = {}
    for rank, idx in enumerate(order):
        split[cohort.records[idx].id] = "train" if rank < n_train else "test"
    return Cohort(records=cohort.records, schema=cohort.schema, split=split)
