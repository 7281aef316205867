"""Gender word lists: defining pairs, seed pairs, WEAT queries and labelled words.

Lexicon files are JSON objects with the keys `defining_pairs`, `seed_pairs`,
`weat_queries`, `neutral_words` and optionally `gendered_words`
(token -> "m" | "f").
"""

import json
import logging
import os
from collections.abc import Iterable
from dataclasses import dataclass, field

from metafair.errors import InvalidArgument, IoError, ParseError
from metafair.security.paths import OutputGuard

logger = logging.getLogger(__name__)

NEUTRAL_POLICIES = ("all-but-defining", "explicit")


@dataclass(frozen=True)
class WeatQuery:
    """Two target sets X, Y compared against two attribute sets A, B."""

    name: str
    X: tuple[str, ...]
    Y: tuple[str, ...]
    A: tuple[str, ...]
    B: tuple[str, ...]

    def __post_init__(self):
        if not self.X or not self.Y:
            raise InvalidArgument(f"WEAT query {self.name!r}: target sets must be non-empty")
        if len(self.X) != len(self.Y):
            raise InvalidArgument(
                f"WEAT query {self.name!r}: |X|={len(self.X)} differs from |Y|={len(self.Y)}"
            )
        if not self.A or not self.B:
            raise InvalidArgument(f"WEAT query {self.name!r}: attribute sets must be non-empty")
        if set(self.X) & set(self.Y):
            raise InvalidArgument(f"WEAT query {self.name!r}: X and Y overlap")
        if set(self.A) & set(self.B):
            raise InvalidArgument(f"WEAT query {self.name!r}: A and B overlap")

    @classmethod
    def from_dict(cls, data: dict) -> "WeatQuery":
        try:
            return cls(
                name=str(data["name"]),
                X=tuple(data["X"]),
                Y=tuple(data["Y"]),
                A=tuple(data["A"]),
                B=tuple(data["B"]),
            )
        except KeyError as e:
            raise InvalidArgument(f"WEAT query is missing key {e}") from None

    def to_dict(self) -> dict:
        return {"name": self.name, "X": list(self.X), "Y": list(self.Y),
                "A": list(self.A), "B": list(self.B)}


@dataclass(frozen=True)
class GenderLexicon:
    defining_pairs: tuple[tuple[str, str], ...]
    seed_pairs: tuple[tuple[str, str], ...] = ()
    weat_queries: tuple[WeatQuery, ...] = ()
    neutral_words: tuple[str, ...] = ()
    gendered_words: dict[str, str] = field(default_factory=dict)
    neutral_policy: str = "all-but-defining"

    def __post_init__(self):
        if self.neutral_policy not in NEUTRAL_POLICIES:
            raise InvalidArgument(f"Unknown neutral-word policy {self.neutral_policy!r}")
        bad = {t: g for t, g in self.gendered_words.items() if g not in ("m", "f")}
        if bad:
            raise InvalidArgument(f"gendered_words labels must be 'm' or 'f': {bad}")

    @property
    def definitional_words(self) -> set[str]:
        """Every token of a defining or seed pair."""
        return {t for pair in (*self.defining_pairs, *self.seed_pairs) for t in pair}

    def neutral(self, vocab: Iterable[str]) -> list[str]:
        """Gender-neutral words of `vocab` under the lexicon's policy."""
        if self.neutral_policy == "explicit":
            allowed = set(self.neutral_words)
            return [w for w in vocab if w in allowed]
        exempt = self.definitional_words
        return [w for w in vocab if w not in exempt]

    def labelled_words(self) -> dict[str, int]:
        """token -> +1 (masculine) / -1 (feminine) for classifier training."""
        labels: dict[str, int] = {}
        for m, f in (*self.defining_pairs, *self.seed_pairs):
            labels.setdefault(m, 1)
            labels.setdefault(f, -1)
        for token, g in self.gendered_words.items():
            labels.setdefault(token, 1 if g == "m" else -1)
        return labels

    @classmethod
    def from_dict(cls, data: dict) -> "GenderLexicon":
        def pairs(key):
            out = []
            for item in data.get(key, []):
                if len(item) != 2:
                    raise InvalidArgument(f"{key} entries must be pairs, got {item!r}")
                out.append((str(item[0]), str(item[1])))
            return tuple(out)

        neutral = tuple(data.get("neutral_words", []))
        return cls(
            defining_pairs=pairs("defining_pairs"),
            seed_pairs=pairs("seed_pairs"),
            weat_queries=tuple(WeatQuery.from_dict(q) for q in data.get("weat_queries", [])),
            neutral_words=neutral,
            gendered_words={str(k): str(v) for k, v in data.get("gendered_words", {}).items()},
            neutral_policy=data.get(
                "neutral_policy", "explicit" if neutral else "all-but-defining"
            ),
        )

    def to_dict(self) -> dict:
        return {
            "defining_pairs": [list(p) for p in self.defining_pairs],
            "seed_pairs": [list(p) for p in self.seed_pairs],
            "weat_queries": [q.to_dict() for q in self.weat_queries],
            "neutral_words": list(self.neutral_words),
            "gendered_words": dict(self.gendered_words),
            "neutral_policy": self.neutral_policy,
        }


def load_lexicon(path: str) -> GenderLexicon:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise IoError(f"Lexicon not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.lineno, f"invalid JSON: {e.msg}") from None
    lexicon = GenderLexicon.from_dict(data)
    logger.info(
        f"Loaded lexicon {path}: {len(lexicon.defining_pairs)} defining pairs, "
        f"{len(lexicon.weat_queries)} WEAT queries"
    )
    return lexicon


def load_weat_queries(path: str) -> list[WeatQuery]:
    """Read WEAT queries from a JSON object, a list of objects, or a lexicon file."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise IoError(f"WEAT query file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.lineno, f"invalid JSON: {e.msg}") from None
    if isinstance(data, dict) and "weat_queries" in data:
        data = data["weat_queries"]
    if isinstance(data, dict):
        data = [data]
    return [WeatQuery.from_dict(q) for q in data]


def save_lexicon(lexicon: GenderLexicon, path: str, guard: OutputGuard | None = None) -> None:
    path = str(path)
    if guard is not None:
        guard.check(path)
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(lexicon.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e
    logger.info(f"Saved lexicon to {path}")
