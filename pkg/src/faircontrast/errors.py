"""Exception types shared across the pipeline.

Everything raised on purpose derives from FairContrastError so callers (and
the CLI) can distinguish our failures from genuine bugs.
"""


class FairContrastError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(FairContrastError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(FairContrastError):
    """An input value lies outside the mathematical domain of an operation."""


class ContractError(FairContrastError):
    """A caller violated an API precondition."""


class ConfigError(FairContrastError):
    """A configuration value is out of range or inconsistent."""


class SchemaError(FairContrastError):
    """Data does not match the declared schema (vocabulary, dimension, header)."""


class IngestionError(FairContrastError):
    """Input files disagree about which record ids exist."""


class ParseError(FairContrastError):
    """A data file could not be parsed.  Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class ImputationError(FairContrastError):
    """Imputation cannot proceed, e.g. a feature column with no observed values."""


class MetricError(FairContrastError):
    """A metric is undefined on the given evaluation frame."""


class TrainingError(FairContrastError):
    """Training diverged or was invoked in an invalid state."""


class PipelineOrderError(FairContrastError):
    """A pipeline stage was invoked before its prerequisites were met."""
