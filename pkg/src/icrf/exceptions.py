"""Exception types shared across the package."""


class IcrfError(Exception):
    """Base class; carries a machine-readable ``code`` for the CLI."""

    code = "error"


class ParseError(IcrfError):
    code = "parse_error"


class InvariantViolation(IcrfError):
    code = "invariant_violation"


class EmptyInput(IcrfError):
    code = "empty_input"


class DegenerateInterval(IcrfError):
    """The carried curve assigns (numerically) no mass to a subject's interval."""

    code = "degenerate_interval"


class InvalidAnchor(IcrfError):
    code = "invalid_anchor"


class DegenerateQuantiles(IcrfError):
    code = "degenerate_quantiles"


class EmptyGroup(IcrfError):
    code = "empty_group"


class ZeroRisk(IcrfError):
    code = "zero_risk"


class InsufficientData(IcrfError):
    code = "insufficient_data"


class DimensionMismatch(IcrfError):
    code = "dimension_mismatch"


class InvalidFold(IcrfError):
    code = "invalid_fold"


class EmptyOob(IcrfError):
    code = "empty_oob"


class AllSkipped(IcrfError):
    code = "all_skipped"


class MissingTruth(IcrfError):
    code = "missing_truth"
