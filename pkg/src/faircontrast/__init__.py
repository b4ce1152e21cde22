"""Fairness-aware contrastive representation learning for multimodal patient
records, with counterpart synthesis and subgroup fairness evaluation."""

__version__ = "0.1.0"

from .tensor import Tensor, backward  # noqa: F401
from .data import Cohort, CohortSpec, PatientRecord, SensitiveAttributes  # noqa: F401
