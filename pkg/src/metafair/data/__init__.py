"""Data module - Toy assets bundled for offline runs and tests."""

from pathlib import Path

from metafair.errors import IoError

TOY_DIR = Path(__file__).resolve().parent / "toy"


def toy_path(name: str) -> str:
    """Absolute path of a bundled toy asset, e.g. toy_path("source_a.txt")."""
    path = TOY_DIR / name
    if not path.is_file():
        available = sorted(p.name for p in TOY_DIR.iterdir())
        raise IoError(f"No toy asset {name!r}; available: {available}")
    return str(path)
