"""Run-level configuration loaded from environment variables."""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

from metafair.errors import UsageError

load_dotenv()

MISSING_WORD_POLICIES = ("skip", "error")


def _env_number(name: str, default: str, kind: type[int] | type[float]) -> int | float:
    raw = os.getenv(name, default).strip()
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"{name} must be {'an integer' if kind is int else 'a number'}, "
                         f"got {raw!r}") from None


@dataclass
class Config:
    """Defaults shared by every subcommand; CLI flags and spec files override them."""

    seed: int = 0
    log_level: str = "INFO"

    # Evaluation
    missing_words: str = "skip"
    permutations: int = 10000
    exact_permutation_limit: int = 20000
    wat_alpha: float = 0.85
    wat_tol: float = 1e-10
    wat_max_iters: int = 10000

    # Output
    float_precision: int | None = None

    @classmethod
    def from_env(cls) -> "Config":
        """Create Config from environment variables.

        Raises UsageError when a numeric variable does not parse.
        """
        precision = os.getenv("METAFAIR_FLOAT_PRECISION", "").strip()
        return cls(
            seed=_env_number("METAFAIR_SEED", "0", int),
            log_level=os.getenv("METAFAIR_LOG_LEVEL", "INFO").upper(),
            missing_words=os.getenv("METAFAIR_MISSING_WORDS", "skip").lower(),
            permutations=_env_number("METAFAIR_PERMUTATIONS", "10000", int),
            exact_permutation_limit=_env_number("METAFAIR_EXACT_LIMIT", "20000", int),
            wat_alpha=_env_number("METAFAIR_WAT_ALPHA", "0.85", float),
            wat_tol=_env_number("METAFAIR_WAT_TOL", "1e-10", float),
            wat_max_iters=_env_number("METAFAIR_WAT_MAX_ITERS", "10000", int),
            float_precision=(
                _env_number("METAFAIR_FLOAT_PRECISION", "", int) if precision else None
            ),
        )

    def validate(self) -> list[str]:
        """Validate settings. Returns list of error messages."""
        errors = []
        if self.missing_words not in MISSING_WORD_POLICIES:
            errors.append(
                f"METAFAIR_MISSING_WORDS must be one of {MISSING_WORD_POLICIES}, "
                f"got {self.missing_words!r}"
            )
        if self.permutations < 1:
            errors.append("METAFAIR_PERMUTATIONS must be positive")
        if self.exact_permutation_limit < 1:
            errors.append("METAFAIR_EXACT_LIMIT must be positive")
        if not 0.0 < self.wat_alpha < 1.0:
            errors.append("METAFAIR_WAT_ALPHA must lie in (0, 1)")
        if self.wat_tol <= 0:
            errors.append("METAFAIR_WAT_TOL must be positive")
        if self.wat_max_iters < 1:
            errors.append("METAFAIR_WAT_MAX_ITERS must be positive")
        if self.float_precision is not None and not 1 <= self.float_precision <= 17:
            errors.append("METAFAIR_FLOAT_PRECISION must be between 1 and 17")
        if self.log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"Unknown log level {self.log_level!r}")
        return errors
