"""Registry of parametrized ODE systems.

Built-in systems live next to this module as ``*.ode`` files written in
the :mod:`imts_forge.dsl` language; more can be loaded from a directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from ..dsl import SystemSpec, parse_system

__all__ = [
    "RegistryEntry",
    "Registry",
    "DuplicateSystemError",
    "SystemNotFoundError",
    "default_registry",
    "get_system",
    "list_systems",
    "BUILTIN_NAMES",
    "SYSTEMS_DIR_ENV",
]

SYSTEMS_DIR_ENV = "IMTS_FORGE_SYSTEMS_DIR"
BUILTIN_NAMES = (
    "fitzhugh_nagumo",
    "harmonic",
    "lin",
    "lorenz",
    "lorenz96",
    "lotka_volterra",
    "sir",
    "vanderpol",
)


class DuplicateSystemError(ValueError):
    pass


class SystemNotFoundError(KeyError):
    def __str__(self) -> str:
        return f"no system named {self.args[0]!r}"


@dataclass(frozen=True)
class RegistryEntry:
    spec: SystemSpec
    source: str  # "builtin" or "dsl_file"
    path: str | None = None
    tags: tuple[str, ...] = field(default_factory=tuple)


class Registry:
    def __init__(self, entries: Iterable[RegistryEntry] = ()):
        self._entries: dict[str, RegistryEntry] = {}
        for entry in entries:
            self.add(entry)

    @classmethod
    def with_builtins(cls, systems_dir: str | os.PathLike | None = None) -> "Registry":
        reg = cls()
        pkg = resources.files(__package__)
        for name in BUILTIN_NAMES:
            text = (pkg / f"{name}.ode").read_text(encoding="utf-8")
            reg.add(RegistryEntry(parse_system(text), "builtin", tags=("builtin",)))
        if systems_dir:
            reg.load_dir(systems_dir)
        return reg

    def add(self, entry: RegistryEntry) -> None:
        name = entry.spec.name
        if name in self._entries:
            raise DuplicateSystemError(f"a system named {name!r} is already registered")
        self._entries[name] = entry

    def load_file(self, path: str | os.PathLike) -> SystemSpec:
        path = Path(path)
        spec = parse_system(path.read_bytes())
        self.add(RegistryEntry(spec, "dsl_file", str(path)))
        return spec

    def load_dir(self, directory: str | os.PathLike) -> list[SystemSpec]:
        """Load every ``*.ode`` file in ``directory`` in sorted filename order."""
        return [self.load_file(p) for p in sorted(Path(directory).glob("*.ode"))]

    def get(self, name: str) -> SystemSpec:
        try:
            return self._entries[name].spec
        except KeyError:
            raise SystemNotFoundError(name) from None

    def entry(self, name: str) -> RegistryEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise SystemNotFoundError(name) from None

    def list(self) -> list[tuple[str, int, int, str]]:
        """``(name, channels, constant count, source)`` rows, alphabetical."""
        return [
            (name, e.spec.channels, len(e.spec.constants), e.source)
            for name, e in sorted(self._entries.items())
        ]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)


_default: Registry | None = None


def default_registry() -> Registry:
    """Process-wide registry of built-ins plus ``$IMTS_FORGE_SYSTEMS_DIR``."""
    global _default
    if _default is None:
        _default = Registry.with_builtins(os.environ.get(SYSTEMS_DIR_ENV) or None)
    return _default


def get_system(name: str) -> SystemSpec:
    return default_registry().get(name)


def list_systems() -> list[tuple[str, int, int, str]]:
    return default_registry().list()
