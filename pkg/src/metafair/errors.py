"""Exception hierarchy shared by every metafair module.

Each class carries the process exit code the CLI reports for it:
2 for usage problems, 3 for bad or insufficient data, 4 for numerical failures.
"""

from collections.abc import Iterable


class MetaFairError(Exception):
    """Base class for all errors raised by metafair."""

    exit_code = 1


# Usage (2)


class UsageError(MetaFairError):
    exit_code = 2


class InvalidArgument(UsageError):
    """A parameter is out of range or inconsistent with another."""


class ConfigError(UsageError):
    """A pipeline or method configuration cannot be executed."""


# Data (3)


class DataError(MetaFairError):
    exit_code = 3


class ParseError(DataError):
    """Malformed input file; `line` is 1-based."""

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class DuplicateToken(DataError):
    def __init__(self, token: str, path: str = ""):
        self.token = token
        where = f" in {path}" if path else ""
        super().__init__(f"Duplicate token {token!r}{where}")


class OOVError(DataError, KeyError):
    """Lookup of a token that is not in the vocabulary."""

    def __init__(self, token: str, name: str = ""):
        self.token = token
        where = f" of {name!r}" if name else ""
        DataError.__init__(self, f"Token {token!r} is not in the vocabulary{where}")

    def __str__(self) -> str:
        return self.args[0]


class MissingWords(DataError):
    def __init__(self, words: Iterable[str], context: str = ""):
        self.words = sorted(set(words))
        prefix = f"{context}: " if context else ""
        shown = ", ".join(self.words[:20])
        more = f" (+{len(self.words) - 20} more)" if len(self.words) > 20 else ""
        super().__init__(f"{prefix}{len(self.words)} unresolved words: {shown}{more}")


class EmptyTrainingSet(DataError):
    pass


class EmptyDefiningSets(DataError):
    pass


class EmptyGloss(DataError):
    def __init__(self, word: str):
        self.word = word
        super().__init__(f"Gloss of {word!r} has no resolvable tokens")


class InsufficientData(DataError):
    pass


class InsufficientOverlap(DataError):
    pass


class NoScorableInstances(DataError):
    pass


class EmptyPlot(DataError):
    pass


class IoError(DataError):
    pass


# Numeric (4)


class NumericError(MetaFairError):
    exit_code = 4


class DegenerateSubspace(NumericError):
    pass


class DegenerateVector(NumericError):
    def __init__(self, words: Iterable[str]):
        self.words = list(words)
        super().__init__(f"Zero residual vector for: {', '.join(self.words[:20])}")


class DegenerateLabels(NumericError):
    pass


class DegenerateEffect(NumericError):
    pass


class UndefinedCorrelation(NumericError):
    pass


class NonConvergence(NumericError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"No convergence after {iterations} iterations (residual {residual:.3e})")


class StageError(MetaFairError):
    """Wraps an error raised inside a pipeline stage, keeping its exit code."""

    def __init__(self, stage: str, cause: MetaFairError):
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"[{stage}] {cause}")
