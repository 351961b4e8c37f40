"""Bundled maps shipped with the package."""

from importlib import resources

from ..worldmap import WorldMap, load_map


def list_bundled() -> list[str]:
    return sorted(
        p.name[: -len(".json")]
        for p in resources.files(__name__).iterdir()
        if p.name.endswith(".json")
    )


def load_bundled(name: str) -> WorldMap:
    path = resources.files(__name__) / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"no bundled map {name!r}; have {list_bundled()}")
    return load_map(path.read_text())
