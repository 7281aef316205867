"""Output path guard: writers may only touch paths named on the command line."""

import os
from collections.abc import Iterable
from pathlib import Path

from metafair.errors import InvalidArgument


class OutputGuard:
    """Tracks the output paths a run is allowed to write.

    Paths are compared after resolving symlinks and `..` segments, so a writer
    cannot escape the whitelist through path tricks.
    """

    def __init__(self, allowed: Iterable[str] = ()):
        self._allowed: set[Path] = set()
        for p in allowed:
            self.allow(p)

    def allow(self, path: str) -> None:
        """Register a path named by a flag."""
        self._allowed.add(self._resolve(path))

    @property
    def allowed(self) -> list[str]:
        return sorted(str(p) for p in self._allowed)

    def is_allowed(self, path: str) -> bool:
        try:
            return self._resolve(path) in self._allowed
        except (OSError, ValueError):
            return False

    def check(self, path: str) -> None:
        """Raise InvalidArgument if `path` was not registered."""
        if not self.is_allowed(path):
            raise InvalidArgument(
                f"Refusing to write '{path}': not named by an output flag. "
                f"Allowed: {self.allowed}"
            )

    @staticmethod
    def _resolve(path: str) -> Path:
        return Path(os.path.expanduser(str(path))).resolve()
