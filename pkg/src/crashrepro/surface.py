"""Description of the callable API a search runs against.

Both execution backends (the scenario interpreter and the script runner)
expose the same searchable surface: constructible object types and routines
with finite per-parameter value domains.  Genome generation, validation,
and repair work against this surface only.
"""

from __future__ import annotations

from dataclasses import dataclass

Value = int | bool | str

_KIND_NAMES = {int: "int", bool: "bool", str: "str"}


def value_kind(v: Value) -> str:
    """Type tag used for compatibility checks; bool is never conflated with int."""
    if type(v) not in _KIND_NAMES:
        raise TypeError(f"unsupported value {v!r}")
    return _KIND_NAMES[type(v)]


def value_in(v: Value, domain: tuple[Value, ...]) -> bool:
    return any(type(v) is type(d) and v == d for d in domain)


@dataclass(frozen=True, slots=True)
class Param:
    """A routine parameter with its finite value domain."""

    name: str
    domain: tuple[Value, ...]

    def __post_init__(self):
        if not self.domain:
            raise ValueError(f"parameter {self.name!r} has an unbounded (empty) domain")
        kinds = {value_kind(v) for v in self.domain}
        if len(kinds) != 1:
            raise ValueError(f"parameter {self.name!r} mixes value kinds {sorted(kinds)}")

    @property
    def kind(self) -> str:
        return value_kind(self.domain[0])


@dataclass(frozen=True, slots=True)
class RoutineSig:
    """Callable signature: free function when owner is None, else a method."""

    name: str
    owner: str | None
    params: tuple[Param, ...]


@dataclass(frozen=True, slots=True)
class ApiSurface:
    """Constructible types plus invokable routine signatures."""

    types: tuple[str, ...]
    routines: tuple[RoutineSig, ...]

    def __post_init__(self):
        names = [r.name for r in self.routines]
        if len(set(names)) != len(names):
            raise ValueError("routine names must be unique")
        if len(set(self.types)) != len(self.types):
            raise ValueError("type names must be unique")
        for r in self.routines:
            if r.owner is not None and r.owner not in self.types:
                raise ValueError(f"routine {r.name!r} owned by undeclared type {r.owner!r}")
        if not self.routines:
            raise ValueError("surface declares no routines")

    def routine(self, name: str) -> RoutineSig | None:
        for r in self.routines:
            if r.name == name:
                return r
        return None

    def has_type(self, name: str) -> bool:
        return name in self.types

    def value_pool(self) -> tuple[Value, ...]:
        """All domain constants, deduplicated kind-aware, in declaration order."""
        seen: set[tuple[str, Value]] = set()
        pool: list[Value] = []
        for r in self.routines:
            for p in r.params:
                for v in p.domain:
                    key = (value_kind(v), v)
                    if key not in seen:
                        seen.add(key)
                        pool.append(v)
        return tuple(pool)
