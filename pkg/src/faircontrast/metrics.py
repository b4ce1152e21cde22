"""Classification and subgroup fairness metrics.

An evaluation frame bundles true labels, scores, a decision threshold, and
one subgroup labelling per sensitive attribute (age enters through ten-year
bins).  On top of it:

  f1              harmonic mean of precision and recall, 0 when degenerate
  auroc           rank estimator with midrank tie handling
  equalized_odds  mean absolute TPR gap and FPR gap over unordered subgroup
                  pairs; a subgroup whose rate is undefined (no positives,
                  or no negatives) drops out of the affected pairs and the
                  exclusion is recorded
  eddi            mean over subgroups of (subgroup error rate - overall
                  error rate) / max(OER, 1 - OER); the signed mean can hide
                  offsetting gaps, so the absolute variant is the default
                  and both are always reported

The report renderer prints percentages to one decimal with direction markers
so numbers can sit next to published tables.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .data import SENSITIVE_ATTRIBUTES, age_bin_label
from .errors import ConfigError, ContractError, MetricError


@dataclass
class EvalFrame:
    labels: np.ndarray  # [N] ints in {0, 1}
    scores: np.ndarray  # [N] floats in [0, 1]
    subgroups: dict[str, np.ndarray]  # attribute -> [N] subgroup names
    threshold: float = 0.5

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.labels.ndim != 1 or self.labels.shape != self.scores.shape:
            raise ContractError("labels and scores must be equal-length vectors")
        if self.labels.size == 0:
            raise ContractError("evaluation frame has no records")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ContractError("labels must be 0 or 1")
        if np.any(self.scores < 0.0) or np.any(self.scores > 1.0):
            raise ContractError("scores must lie in [0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        self.subgroups = {k: np.asarray(v) for k, v in self.subgroups.items()}
        for attr, values in self.subgroups.items():
            if values.shape != self.labels.shape:
                raise ContractError(f"subgroup labelling {attr!r} has the wrong length")

    @property
    def predictions(self) -> np.ndarray:
        return (self.scores >= self.threshold).astype(int)


def frame_from_records(records, scores, threshold: float = 0.5) -> EvalFrame:
    """Build a frame from patient records and their model scores."""
    labels = np.array([r.label for r in records], dtype=int)
    subgroups = {
        "gender": np.array([r.attrs.gender for r in records]),
        "race": np.array([r.attrs.race for r in records]),
        "ethnicity": np.array([r.attrs.ethnicity for r in records]),
        "age": np.array([age_bin_label(r.attrs.age) for r in records]),
        "ses": np.array([r.attrs.ses for r in records]),
    }
    return EvalFrame(labels=labels, scores=np.asarray(scores), subgroups=subgroups, threshold=threshold)


# ---------------------------------------------------------------------------
# headline metrics
# ---------------------------------------------------------------------------


def f1(frame: EvalFrame) -> float:
    preds = frame.predictions
    tp = int(np.sum((frame.labels == 1) & (preds == 1)))
    fp = int(np.sum((frame.labels == 0) & (preds == 1)))
    fn = int(np.sum((frame.labels == 1) & (preds == 0)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks, ties replaced by the mean rank of the tied block."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)  # mean of ranks i+1 .. j
        i = j
    return ranks


def auroc(frame: EvalFrame) -> float:
    n_pos = int(np.sum(frame.labels == 1))
    n_neg = int(np.sum(frame.labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError("auroc needs both classes present")
    ranks = _midranks(frame.scores)
    pos_rank_sum = float(ranks[frame.labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# subgroup fairness
# ---------------------------------------------------------------------------


@dataclass
class SubgroupStats:
    name: str
    count: int
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def tpr(self) -> float | None:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else None

    @property
    def fpr(self) -> float | None:
        return self.fp / (self.fp + self.tn) if (self.fp + self.tn) else None

    @property
    def error_rate(self) -> float:
        return (self.fp + self.fn) / self.count


def subgroup_stats(frame: EvalFrame, attribute: str) -> list[SubgroupStats]:
    if attribute not in frame.subgroups:
        raise ContractError(f"frame has no subgroup labelling for {attribute!r}")
    values = frame.subgroups[attribute]
    preds = frame.predictions
    stats = []
    for name in sorted(set(values.tolist())):
        mask = values == name
        y, p = frame.labels[mask], preds[mask]
        stats.append(
            SubgroupStats(
                name=str(name),
                count=int(mask.sum()),
                tp=int(np.sum((y == 1) & (p == 1))),
                fp=int(np.sum((y == 0) & (p == 1))),
                tn=int(np.sum((y == 0) & (p == 0))),
                fn=int(np.sum((y == 1) & (p == 0))),
            )
        )
    return stats


@dataclass
class EqualizedOddsResult:
    attribute: str
    eo_tpr: float | None
    eo_fpr: float | None
    eo: float
    excluded_tpr: list[str] = field(default_factory=list)
    excluded_fpr: list[str] = field(default_factory=list)


def equalized_odds(frame: EvalFrame, attribute: str) -> EqualizedOddsResult:
    """Mean absolute pairwise TPR and FPR gaps over the attribute's subgroups.

    Pairs touching a subgroup with an undefined rate are dropped from the
    affected side, and the excluded subgroup names are reported.  If neither
    side has a single valid pair the metric is undefined.
    """
    stats = subgroup_stats(frame, attribute)
    if len(stats) < 2:
        raise MetricError(f"equalized odds for {attribute!r} needs at least two subgroups")

    def side(rate_name):
        rates = {s.name: getattr(s, rate_name) for s in stats}
        excluded = sorted(name for name, r in rates.items() if r is None)
        gaps = [
            abs(rates[a] - rates[b])
            for a, b in itertools.combinations(sorted(rates), 2)
            if rates[a] is not None and rates[b] is not None
        ]
        value = sum(gaps) / len(gaps) if gaps else None
        return value, excluded

    eo_tpr, excluded_tpr = side("tpr")
    eo_fpr, excluded_fpr = side("fpr")
    sides = [s for s in (eo_tpr, eo_fpr) if s is not None]
    if not sides:
        raise MetricError(f"equalized odds for {attribute!r}: every subgroup pair is undefined")
    return EqualizedOddsResult(
        attribute=attribute,
        eo_tpr=eo_tpr,
        eo_fpr=eo_fpr,
        eo=sum(sides) / len(sides),
        excluded_tpr=excluded_tpr,
        excluded_fpr=excluded_fpr,
    )


def eddi(frame: EvalFrame, attribute: str, variant: str = "absolute") -> float:
    """Error-rate disparity of the attribute's subgroups against the cohort.

    Each subgroup contributes (ER_s - OER) / max(OER, 1 - OER); the signed
    variant averages the raw gaps, the absolute variant their magnitudes.
    """
    if variant not in ("absolute", "signed"):
        raise ConfigError(f"unknown eddi variant {variant!r}")
    stats = subgroup_stats(frame, attribute)
    if not stats:
        raise MetricError(f"eddi for {attribute!r} has no subgroups")
    preds = frame.predictions
    oer = float(np.mean(preds != frame.labels))
    denom = max(oer, 1.0 - oer)
    gaps = [(s.error_rate - oer) / denom for s in stats]
    if variant == "absolute":
        gaps = [abs(g) for g in gaps]
    return float(sum(gaps) / len(gaps))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class AttributeFairness:
    attribute: str
    eo: float | None
    eo_tpr: float | None
    eo_fpr: float | None
    eddi_abs: float | None
    eddi_signed: float | None
    subgroups: list[SubgroupStats]
    excluded_tpr: list[str]
    excluded_fpr: list[str]
    error: str | None = None


@dataclass
class FairnessReport:
    n: int
    threshold: float
    f1: float
    auroc: float
    overall_error_rate: float
    attributes: list[AttributeFairness]
    eo_mean: float | None
    eddi_abs_mean: float | None
    eddi_signed_mean: float | None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "threshold": self.threshold,
            "f1": self.f1,
            "auroc": self.auroc,
            "overall_error_rate": self.overall_error_rate,
            "eo_mean": self.eo_mean,
            "eddi_abs_mean": self.eddi_abs_mean,
            "eddi_signed_mean": self.eddi_signed_mean,
            "attributes": [
                {
                    "attribute": a.attribute,
                    "eo": a.eo,
                    "eo_tpr": a.eo_tpr,
                    "eo_fpr": a.eo_fpr,
                    "eddi_abs": a.eddi_abs,
                    "eddi_signed": a.eddi_signed,
                    "excluded_tpr": a.excluded_tpr,
                    "excluded_fpr": a.excluded_fpr,
                    "error": a.error,
                    "subgroups": [
                        {
                            "name": s.name,
                            "count": s.count,
                            "tp": s.tp,
                            "fp": s.fp,
                            "tn": s.tn,
                            "fn": s.fn,
                            "error_rate": s.error_rate,
                        }
                        for s in a.subgroups
                    ],
                }
                for a in self.attributes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def fairness_report(frame: EvalFrame, attributes=SENSITIVE_ATTRIBUTES) -> FairnessReport:
    """Evaluate the frame per attribute; metric failures on one attribute are
    annotated instead of aborting the report."""
    rows: list[AttributeFairness] = []
    for attr in attributes:
        stats = subgroup_stats(frame, attr)
        try:
            eo_res = equalized_odds(frame, attr)
            rows.append(
                AttributeFairness(
                    attribute=attr,
                    eo=eo_res.eo,
                    eo_tpr=eo_res.eo_tpr,
                    eo_fpr=eo_res.eo_fpr,
                    eddi_abs=eddi(frame, attr, "absolute"),
                    eddi_signed=eddi(frame, attr, "signed"),
                    subgroups=stats,
                    excluded_tpr=eo_res.excluded_tpr,
                    excluded_fpr=eo_res.excluded_fpr,
                )
            )
        except MetricError as exc:
            rows.append(
                AttributeFairness(
                    attribute=attr,
                    eo=None,
                    eo_tpr=None,
                    eo_fpr=None,
                    eddi_abs=eddi(frame, attr, "absolute"),
                    eddi_signed=eddi(frame, attr, "signed"),
                    subgroups=stats,
                    excluded_tpr=[],
                    excluded_fpr=[],
                    error=str(exc),
                )
            )

    eos = [a.eo for a in rows if a.eo is not None]
    eddis_abs = [a.eddi_abs for a in rows if a.eddi_abs is not None]
    eddis_signed = [a.eddi_signed for a in rows if a.eddi_signed is not None]
    preds = frame.predictions
    return FairnessReport(
        n=int(frame.labels.size),
        threshold=frame.threshold,
        f1=f1(frame),
        auroc=auroc(frame),
        overall_error_rate=float(np.mean(preds != frame.labels)),
        attributes=rows,
        eo_mean=sum(eos) / len(eos) if eos else None,
        eddi_abs_mean=sum(eddis_abs) / len(eddis_abs) if eddis_abs else None,
        eddi_signed_mean=sum(eddis_signed) / len(eddis_signed) if eddis_signed else None,
    )


def _pct(value: float | None) -> str:
    return "  n/a" if value is None else f"{100.0 * value:5.1f}"


def format_report_table(report: FairnessReport) -> str:
    """Aligned text table; percentages to one decimal, arrows mark direction."""
    lines = []
    lines.append(f"records: {report.n}   threshold: {report.threshold:g}")
    lines.append("")
    lines.append("overall            F1 ↑   AUROC ↑    EO ↓   EDDI ↓")
    lines.append(
        "                  "
        + f"{_pct(report.f1)}   {_pct(report.auroc)}   {_pct(report.eo_mean)}   {_pct(report.eddi_abs_mean)}"
    )
    lines.append("")
    lines.append("attribute          EO ↓   EDDI ↓   EDDI(signed)")
    for a in report.attributes:
        signed = "   n/a" if a.eddi_signed is None else f"{100.0 * a.eddi_signed:+6.1f}"
        lines.append(f"{a.attribute:<16}{_pct(a.eo)}   {_pct(a.eddi_abs)}   {signed}")
        if a.error:
            lines.append(f"    undefined: {a.error}")
        for side, excluded in (("TPR", a.excluded_tpr), ("FPR", a.excluded_fpr)):
            if excluded:
                lines.append(f"    excluded from {side} pairs: {', '.join(excluded)}")
    return "\n".join(lines) + "\n"
