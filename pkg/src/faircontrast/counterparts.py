"""Synthetic counterpart construction for contrastive pairing.

A counterpart keeps a patient's clinical content but moves every sensitive
attribute somewhere else: categorical attributes are resampled away from the
source category, the age moves to a different ten-year bin, the longitudinal
series is regenerated by the gated generator from the source's latent code,
and the note embedding passes through the configured policy.  Counterparts
exist only for training records; evaluation never sees them.

Per-patient randomness is derived by hashing the global seed with the patient
id, so builds are reproducible and order-independent.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    AGE_BIN_LO,
    AGE_BIN_HI,
    AGE_BIN_WIDTH,
    CATEGORICAL_ATTRIBUTES,
    Cohort,
    SensitiveAttributes,
    age_bin_index,
)
from .errors import ConfigError, ContractError, ParseError, PipelineOrderError, SchemaError
from .gan import GanConfig, GanParams, GateReport, sample_series

NOTE_POLICIES = ("identity", "jitter")


@dataclass
class NotePolicy:
    kind: str = "identity"
    sigma: float = 0.05

    def __post_init__(self):
        if self.kind not in NOTE_POLICIES:
            raise ConfigError(f"note policy must be one of {NOTE_POLICIES}, got {self.kind!r}")
        if self.sigma < 0:
            raise ConfigError(f"jitter sigma must be >= 0, got {self.sigma}")


@dataclass
class CounterpartPolicy:
    note: NotePolicy = field(default_factory=NotePolicy)
    # categories that may never be assigned as a replacement, per attribute
    exclude: dict[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass
class CounterpartRecord:
    source_id: str
    attrs: SensitiveAttributes
    longitudinal: np.ndarray  # [T, F], generator output
    note_embedding: np.ndarray  # [d_n]
    unchanged: tuple[str, ...] = ()  # attributes a degenerate vocabulary pinned


# ---------------------------------------------------------------------------
# resamplers
# ---------------------------------------------------------------------------


def resample_categorical(value, vocabulary, rng: np.random.Generator, exclude=()):
    """Uniform draw over the vocabulary minus the source value.

    Returns (new_value, pinned): ``pinned`` is True when no alternative
    category exists, in which case the source value comes back unchanged.
    """
    if not vocabulary:
        raise SchemaError("cannot resample over an empty vocabulary")
    candidates = [v for v in vocabulary if v != value and v not in exclude]
    if not candidates:
        return value, True
    return candidates[rng.integers(len(candidates))], False


def resample_age(age: int, rng: np.random.Generator) -> int:
    """Integer age from a uniformly chosen different ten-year bin.

    The terminal bin is open ended but draws are capped at 100.
    """
    source_bin = age_bin_index(age)
    n_bins = (AGE_BIN_HI - AGE_BIN_LO) // AGE_BIN_WIDTH
    options = [b for b in range(n_bins) if b != source_bin]
    target = options[rng.integers(len(options))]
    lo = AGE_BIN_LO + target * AGE_BIN_WIDTH
    hi = AGE_BIN_HI if target == n_bins - 1 else lo + AGE_BIN_WIDTH - 1
    return int(rng.integers(lo, hi + 1))


def counterpart_note(note_embedding: np.ndarray, policy: NotePolicy, rng: np.random.Generator) -> np.ndarray:
    note_embedding = np.asarray(note_embedding, dtype=np.float64)
    if policy.kind == "identity" or policy.sigma == 0.0:
        return note_embedding.copy()
    return note_embedding + rng.normal(0.0, policy.sigma, size=note_embedding.shape)


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------


def _patient_rng(seed: int, patient_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{patient_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def build_counterparts(
    cohort: Cohort,
    gan_params: GanParams | None,
    gan_config: GanConfig,
    gate: GateReport | None,
    policy: CounterpartPolicy | None = None,
    seed: int = 0,
    ids=None,
) -> dict[str, CounterpartRecord]:
    """One counterpart per training record (or per requested training id).

    Requires a generator that exists and has passed its distribution gate;
    asking for a non-training id is a contract violation because counterparts
    must never reach evaluation.
    """
    if gan_params is None:
        raise PipelineOrderError("counterpart generation needs a trained generator")
    if gate is None or not gate.passed:
        raise PipelineOrderError(
            "counterpart generation needs a generator that passed the distribution gate"
        )
    policy = policy or CounterpartPolicy()

    train_ids = [r.id for r in cohort.train_records()]
    if ids is None:
        ids = train_ids
    else:
        ids = list(ids)
        outside = sorted(set(ids) - set(train_ids))
        if outside:
            raise ContractError(f"counterparts are train-only; not training ids: {outside}")

    out: dict[str, CounterpartRecord] = {}
    for pid in ids:
        record = cohort.record(pid)
        rng = _patient_rng(seed, pid)
        # draw order: categorical attributes, age, series noise, note policy
        new_cat = {}
        pinned = []
        for attr in CATEGORICAL_ATTRIBUTES:
            value, was_pinned = resample_categorical(
                getattr(record.attrs, attr),
                cohort.schema.vocabularies[attr],
                rng,
                exclude=policy.exclude.get(attr, ()),
            )
            new_cat[attr] = value
            if was_pinned:
                pinned.append(attr)
        new_age = resample_age(record.attrs.age, rng)
        series = sample_series(gan_params, record.longitudinal, rng, gan_config.noise_dim)
        note = counterpart_note(record.note_embedding, policy.note, rng)
        out[pid] = CounterpartRecord(
            source_id=pid,
            attrs=SensitiveAttributes(age=new_age, **new_cat),
            longitudinal=series,
            note_embedding=note,
            unchanged=tuple(pinned),
        )
    return out


def verify_counterparts(cohort: Cohort, counterparts: dict[str, CounterpartRecord]) -> list[str]:
    """Invariant sweep; returns human-readable violations, empty when clean."""
    violations = []
    for pid, cp in counterparts.items():
        record = cohort.record(pid)
        if cp.source_id != pid:
            violations.append(f"{pid}: source_id mismatch ({cp.source_id})")
        for attr in CATEGORICAL_ATTRIBUTES:
            same = getattr(cp.attrs, attr) == getattr(record.attrs, attr)
            if same and len(cohort.schema.vocabularies[attr]) >= 2 and attr not in cp.unchanged:
                violations.append(f"{pid}: {attr} unchanged ({getattr(cp.attrs, attr)!r})")
        if age_bin_index(cp.attrs.age) == age_bin_index(record.attrs.age):
            violations.append(f"{pid}: age bin unchanged ({record.attrs.age} -> {cp.attrs.age})")
        if cp.longitudinal.shape != record.longitudinal.shape:
            violations.append(
                f"{pid}: series shape {cp.longitudinal.shape} != {record.longitudinal.shape}"
            )
        if cp.note_embedding.shape != record.note_embedding.shape:
            violations.append(f"{pid}: note shape mismatch")
    return violations


# ---------------------------------------------------------------------------
# archive
# ---------------------------------------------------------------------------


def save_counterparts(path, counterparts: dict[str, CounterpartRecord]) -> None:
    lines = []
    for pid in sorted(counterparts):
        cp = counterparts[pid]
        lines.append(
            json.dumps(
                {
                    "source_id": cp.source_id,
                    "attrs": dataclasses.asdict(cp.attrs),
                    "longitudinal": cp.longitudinal.tolist(),
                    "note_embedding": cp.note_embedding.tolist(),
                    "unchanged": list(cp.unchanged),
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_counterparts(path) -> dict[str, CounterpartRecord]:
    out: dict[str, CounterpartRecord] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            cp = CounterpartRecord(
                source_id=doc["source_id"],
                attrs=SensitiveAttributes(**doc["attrs"]),
                longitudinal=np.asarray(doc["longitudinal"], dtype=np.float64),
                note_embedding=np.asarray(doc["note_embedding"], dtype=np.float64),
                unchanged=tuple(doc.get("unchanged", ())),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"bad counterpart line: {exc}", line=lineno) from exc
        if cp.source_id in out:
            raise ParseError(f"duplicate counterpart for {cp.source_id!r}", line=lineno)
        out[cp.source_id] = cp
    return out
