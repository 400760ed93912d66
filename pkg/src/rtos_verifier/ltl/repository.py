from pathlib import Path
from typing import TypedDict

from ..errors import ConfigurationError
from .formula import Formula, parse_ltl


class NamedProperty(TypedDict):
    """One `name: formula` line of a property file."""
    name: str
    text: str
    formula: Formula


class PropertyRepository:
    def __init__(self, path: str | Path | None = None):
        # Without a path, the files shipped next to this module are used:
        # src/rtos_verifier/ltl/repository.py -> ltl/properties/*.ltl
        self.path = Path(path) if path is not None else Path(__file__).parent / "properties"

    def _files(self) -> list[Path]:
        if self.path.is_file():
            return [self.path]
        if not self.path.is_dir():
            raise ConfigurationError(f"property file not found: {self.path}")
        return sorted(self.path.glob("*.ltl"))

    def list_properties(self) -> list[NamedProperty]:
        """Every property, in file order. Blank lines and `#` comments are skipped."""
        properties: list[NamedProperty] = []
        seen = set()
        for file in self._files():
            for number, line in enumerate(file.read_text(encoding="utf-8").splitlines(), 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                name, sep, text = line.partition(":")
                name, text = name.strip(), text.strip()
                if not sep or not name or not text:
                    raise ConfigurationError(f"{file}:{number}: expected 'name: formula'")
                if name in seen:
                    raise ConfigurationError(f"{file}:{number}: duplicate property {name!r}")
                seen.add(name)
                properties.append({"name": name, "text": text, "formula": parse_ltl(text)})
        return properties

    def get_property(self, name: str) -> NamedProperty:
        for prop in self.list_properties():
            if prop["name"] == name:
                return prop
        raise ConfigurationError(f"unknown property {name!r} (known: {self.get_property_names()})")

    def get_property_names(self) -> str:
        """Comma-separated list of property names."""
        return ", ".join(p["name"] for p in self.list_properties())


_repository = PropertyRepository()


def get_property_repository(path: str | Path | None = None) -> PropertyRepository:
    if path is None:
        return _repository
    return PropertyRepository(path)
