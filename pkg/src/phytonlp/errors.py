"""Exception hierarchy.

Every error carries a short machine-readable ``kind`` (e.g. ``"not-found"``,
``"schema"``) so the CLI can emit structured reports and tests can match on it.
"""


class PhytoError(Exception):
    """Base class for all package errors."""

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        self.message = message or kind
        super().__init__(f"[{kind}] {self.message}")


class IngestError(PhytoError):
    pass


class BuildError(PhytoError):
    pass


class TrainError(PhytoError):
    pass


class PredictError(PhytoError):
    pass


class MetricError(PhytoError):
    pass


class FilterError(PhytoError):
    pass


class ConfigError(PhytoError):
    pass
