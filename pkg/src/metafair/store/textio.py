"""Word2vec/GloVe-style text format: a "<count> <dim>" header, then one
"<token> <dim floats>" line per word. Files ending in .gz are gzip-compressed.
"""

import gzip
import logging
import os
from collections.abc import Iterable

import aiofiles
import numpy as np

from metafair.errors import DuplicateToken, IoError, ParseError
from metafair.security.paths import OutputGuard
from metafair.store.embedding import EmbeddingSet

logger = logging.getLogger(__name__)


def parse_lines(lines: Iterable[str], path: str, name: str | None = None) -> EmbeddingSet:
    """Parse the text format from an iterable of lines."""
    it = iter(lines)
    try:
        header = next(it)
    except StopIteration:
        raise ParseError(path, 1, "empty file, expected '<count> <dim>' header") from None
    parts = header.split()
    if len(parts) != 2:
        raise ParseError(path, 1, f"expected '<count> <dim>' header, got {header.strip()!r}")
    try:
        count, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(path, 1, f"non-integer header {header.strip()!r}") from None
    if count < 0 or dim <= 0:
        raise ParseError(path, 1, f"invalid header values count={count} dim={dim}")

    vocab: list[str] = []
    seen: set[str] = set()
    matrix = np.empty((count, dim), dtype=np.float64)
    line_no = 1
    for raw in it:
        line_no += 1
        fields = raw.rstrip("\r\n ").split(" ")
        if fields == [""]:
            continue
        if len(vocab) >= count:
            raise ParseError(path, line_no, f"more rows than the {count} declared")
        token, values = fields[0], fields[1:]
        if len(values) != dim:
            raise ParseError(path, line_no, f"expected {dim} values, found {len(values)}")
        if token in seen:
            raise DuplicateToken(token, path)
        try:
            matrix[len(vocab)] = [float(v) for v in values]
        except ValueError:
            raise ParseError(path, line_no, "non-numeric vector component") from None
        if not np.all(np.isfinite(matrix[len(vocab)])):
            raise ParseError(path, line_no, "non-finite vector component")
        seen.add(token)
        vocab.append(token)
    if len(vocab) != count:
        raise ParseError(path, line_no, f"header declares {count} rows, found {len(vocab)}")

    if name is None:
        name = _default_name(path)
    return EmbeddingSet(name, vocab, matrix, dim=dim)


def load_text(path: str, name: str | None = None) -> EmbeddingSet:
    """Load an embedding set from a text file (transparently gunzipping *.gz)."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    try:
        with opener(path, "rt", encoding="utf-8") as f:
            embedding = parse_lines(f, path, name)
    except FileNotFoundError:
        raise IoError(f"File not found: {path}") from None
    except UnicodeDecodeError:
        raise IoError(f"Cannot decode {path} as UTF-8 text") from None
    except OSError as e:
        raise IoError(f"Error reading {path}: {e}") from e
    logger.info(f"Loaded {path}: {len(embedding)} words, dim {embedding.dim}")
    return embedding


async def load_text_async(path: str, name: str | None = None) -> EmbeddingSet:
    """Async variant of load_text used when several sources are read at once."""
    path = str(path)
    if path.endswith(".gz"):
        try:
            async with aiofiles.open(path, "rb") as f:
                data = await f.read()
            text = gzip.decompress(data).decode("utf-8")
        except FileNotFoundError:
            raise IoError(f"File not found: {path}") from None
        except (OSError, UnicodeDecodeError) as e:
            raise IoError(f"Error reading {path}: {e}") from e
    else:
        try:
            async with aiofiles.open(path, "r", encoding="utf-8") as f:
                text = await f.read()
        except FileNotFoundError:
            raise IoError(f"File not found: {path}") from None
        except (OSError, UnicodeDecodeError) as e:
            raise IoError(f"Error reading {path}: {e}") from e
    embedding = parse_lines(text.splitlines(), path, name)
    logger.info(f"Loaded {path}: {len(embedding)} words, dim {embedding.dim}")
    return embedding


def format_float(value: float, precision: int | None = None) -> str:
    """Shortest repr that round-trips exactly, or `precision` significant digits."""
    if precision is not None:
        return f"{value:.{precision}g}"
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text


def format_lines(embedding: EmbeddingSet, precision: int | None = None) -> list[str]:
    lines = [f"{len(embedding)} {embedding.dim}"]
    for token, row in zip(embedding.vocab, embedding.matrix):
        values = " ".join(format_float(v, precision) for v in row)
        lines.append(f"{token} {values}")
    return lines


def save_text(
    embedding: EmbeddingSet,
    path: str,
    precision: int | None = None,
    guard: OutputGuard | None = None,
) -> None:
    """Write `embedding` in the text format; *.gz paths are compressed."""
    path = str(path)
    if guard is not None:
        guard.check(path)
    text = "\n".join(format_lines(embedding, precision)) + "\n"
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        if path.endswith(".gz"):
            # mtime=0 keeps the compressed bytes reproducible
            with open(path, "wb") as raw, gzip.GzipFile(
                filename="", mode="wb", fileobj=raw, mtime=0
            ) as f:
                f.write(text.encode("utf-8"))
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e
    logger.info(f"Saved {embedding.name} ({len(embedding)} words, dim {embedding.dim}) to {path}")


def _default_name(path: str) -> str:
    base = os.path.basename(path)
    for suffix in (".gz", ".txt", ".vec"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    return base or "embedding"
