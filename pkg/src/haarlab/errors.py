"""Exception hierarchy shared by every module."""


class HaarLabError(Exception):
    """Base class; carries a machine-readable ``code`` used by the CLI."""

    code = "error"
    exit_status = 1


class GridOverflowError(HaarLabError):
    """A product or inverse escaped the allowed grid extent."""

    code = "grid-overflow"
    exit_status = 3


class HypothesisRefused(HaarLabError):
    """The hypothesis of a check does not hold on the given sets."""

    code = "hypothesis-refused"
    exit_status = 3

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class ZeroMeasureError(HaarLabError):
    code = "zero-measure"
    exit_status = 3


class NonUnimodularError(HaarLabError):
    code = "nonunimodular"
    exit_status = 3


class SchemaError(HaarLabError):
    code = "schema"
    exit_status = 2


class CertificateError(HaarLabError):
    code = "certificate"
    exit_status = 2


class SoundnessError(HaarLabError):
    """An internal containment check failed; indicates a bug, not bad input."""

    code = "soundness"
    exit_status = 1
