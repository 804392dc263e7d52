"""Service registry: predicate-annotated service descriptors and class lookup.

A registry file is one JSON document::

    {
      "services": [
        {"id": "...", "endpoint": "http://host:port/path",
         "input_class": "...", "output_class": "...",
         "predicates": ["..."], "direction": "Forward" | "Inverse",
         "provider": null}
      ],
      "class_hierarchy": [["subclass IRI", "superclass IRI"], ...]
    }
"""

from __future__ import annotations

import enum
import json
import os
import threading
from dataclasses import dataclass, field
from urllib.parse import urlparse

from share.errors import FormatError, InvalidDescriptor, RegistryError
from share.rdf import IRI


class Direction(str, enum.Enum):
    FORWARD = "Forward"
    INVERSE = "Inverse"

    @classmethod
    def parse(cls, text: str) -> "Direction":
        for d in cls:
            if d.value.lower() == str(text).lower():
                return d
        raise ValueError(f"direction must be Forward or Inverse, not {text!r}")


class Side(str, enum.Enum):
    INPUT = "Input"
    OUTPUT = "Output"


def _check_iri(value: str, what: str):
    try:
        IRI(value)
    except (ValueError, TypeError):
        raise InvalidDescriptor(f"{what} is not a valid IRI: {value!r}") from None


@dataclass(frozen=True)
class ServiceDescriptor:
    """A registered service.

    A Forward service receives subjects and answers with the objects of its
    annotated predicates; an Inverse service receives objects and answers
    with the subjects that relate to them.
    """

    id: str
    endpoint: str
    input_class: str
    output_class: str
    predicates: frozenset[str]
    direction: Direction = Direction.FORWARD
    provider: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "predicates", frozenset(self.predicates))
        if not isinstance(self.direction, Direction):
            try:
                object.__setattr__(self, "direction", Direction.parse(self.direction))
            except ValueError as exc:
                raise InvalidDescriptor(str(exc)) from None

    def validate(self) -> "ServiceDescriptor":
        _check_iri(self.id, "id")
        _check_iri(self.input_class, "input_class")
        _check_iri(self.output_class, "output_class")
        if not self.predicates:
            raise InvalidDescriptor(f"service <{self.id}> has no predicate annotations")
        for p in self.predicates:
            _check_iri(p, "predicate")
        url = urlparse(self.endpoint)
        if url.scheme not in ("http", "https") or not url.netloc:
            raise InvalidDescriptor(f"service <{self.id}> has a malformed endpoint {self.endpoint!r}")
        try:
            url.port
        except ValueError:
            raise InvalidDescriptor(f"service <{self.id}> has a malformed endpoint {self.endpoint!r}") from None
        return self

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "endpoint": self.endpoint,
            "input_class": self.input_class,
            "output_class": self.output_class,
            "predicates": sorted(self.predicates),
            "direction": self.direction.value,
            "provider": self.provider,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ServiceDescriptor":
        return cls(
            id=data["id"],
            endpoint=data["endpoint"],
            input_class=data["input_class"],
            output_class=data["output_class"],
            predicates=frozenset(data["predicates"]),
            direction=Direction.parse(data.get("direction", "Forward")),
            provider=data.get("provider"),
        )


@dataclass
class Registry:
    services: dict[str, ServiceDescriptor] = field(default_factory=dict)
    class_hierarchy: set[tuple[str, str]] = field(default_factory=set)

    def __post_init__(self):
        self._lock = threading.RLock()
        pairs, self.class_hierarchy = set(self.class_hierarchy), set()
        for sub, sup in sorted(pairs):
            self.add_subclass(sub, sup)
        for d in list(self.services.values()):
            d.validate()

    def __eq__(self, other):
        if not isinstance(other, Registry):
            return NotImplemented
        return self.services == other.services and self.class_hierarchy == other.class_hierarchy

    def __len__(self) -> int:
        return len(self.services)

    def register(self, d: ServiceDescriptor) -> "Registry":
        """Add or replace (same id) a descriptor. Returns ``self``."""
        d.validate()
        with self._lock:
            services = dict(self.services)
            services[d.id] = d
            self.services = services
        return self

    def unregister(self, service_id: str) -> ServiceDescriptor:
        with self._lock:
            services = dict(self.services)
            d = services.pop(service_id)
            self.services = services
            return d

    def get(self, service_id: str) -> ServiceDescriptor:
        return self.services[service_id]

    def descriptors(self) -> list[ServiceDescriptor]:
        return sorted(self.services.values(), key=lambda d: d.id)

    def add_subclass(self, sub: str, sup: str) -> None:
        _check_iri(sub, "subclass")
        _check_iri(sup, "superclass")
        with self._lock:
            if sub == sup or sub in self._closure_up(sup, self.class_hierarchy):
                raise RegistryError(f"<{sub}> subClassOf <{sup}> would create a cycle")
            self.class_hierarchy = self.class_hierarchy | {(sub, sup)}

    @staticmethod
    def _closure_up(c: str, pairs) -> set[str]:
        up: dict[str, set[str]] = {}
        for a, b in pairs:
            up.setdefault(a, set()).add(b)
        seen: set[str] = set()
        stack = [c]
        while stack:
            for nxt in up.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def superclasses(self, c: str) -> set[str]:
        """Strict transitive superclasses of ``c``."""
        return self._closure_up(c, self.class_hierarchy)

    def subclasses(self, c: str) -> set[str]:
        """Strict transitive subclasses of ``c``."""
        return self._closure_up(c, {(b, a) for a, b in self.class_hierarchy})

    def find_by_predicate(self, p: str | IRI, direction: Direction | str | None = None) -> list[ServiceDescriptor]:
        p = p.value if isinstance(p, IRI) else p
        if direction is not None and not isinstance(direction, Direction):
            direction = Direction.parse(direction)
        services = self.services
        found = [d for d in services.values()
                 if p in d.predicates and (direction is None or d.direction == direction)]
        return sorted(found, key=lambda d: d.id)

    def find_by_class(self, c: str | IRI, side: Side | str) -> list[ServiceDescriptor]:
        """Services able to consume (Input) or produce (Output) instances of ``c``.

        A service declared to consume X accepts instances of every subclass
        of X; a service declared to produce Y produces instances of every
        superclass of Y.
        """
        c = c.value if isinstance(c, IRI) else c
        side = Side(side) if not isinstance(side, Side) else side
        if side is Side.INPUT:
            accepted = {c} | self.superclasses(c)
            found = [d for d in self.services.values() if d.input_class in accepted]
        else:
            accepted = {c} | self.subclasses(c)
            found = [d for d in self.services.values() if d.output_class in accepted]
        return sorted(found, key=lambda d: d.id)

    def to_json(self) -> dict:
        return {
            "services": [d.to_json() for d in self.descriptors()],
            "class_hierarchy": [list(pair) for pair in sorted(self.class_hierarchy)],
        }

    @classmethod
    def from_json(cls, data, where: str = "registry") -> "Registry":
        if not isinstance(data, dict):
            raise FormatError(where, "top level must be a JSON object")
        unknown = set(data) - {"services", "class_hierarchy"}
        if unknown:
            raise FormatError(where, f"unknown field {sorted(unknown)[0]!r}")
        if "services" not in data:
            raise FormatError(where, "missing field 'services'")
        reg = cls()
        seen: set[str] = set()
        for i, entry in enumerate(data["services"]):
            loc = f"{where}: services[{i}]"
            if not isinstance(entry, dict):
                raise FormatError(loc, "must be an object")
            for key in ("id", "endpoint", "input_class", "output_class", "predicates"):
                if key not in entry:
                    raise FormatError(loc, f"missing field {key!r}")
            if entry["id"] in seen:
                raise FormatError(loc, f"duplicate service id {entry['id']!r}")
            seen.add(entry["id"])
            if not isinstance(entry["predicates"], list):
                raise FormatError(f"{loc}.predicates", "must be a list")
            try:
                reg.register(ServiceDescriptor.from_json(entry))
            except (InvalidDescriptor, ValueError) as exc:
                raise FormatError(loc, str(exc)) from None
        for i, pair in enumerate(data.get("class_hierarchy", [])):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise FormatError(f"{where}: class_hierarchy[{i}]", "must be a [subclass, superclass] pair")
            try:
                reg.add_subclass(*pair)
            except (RegistryError, InvalidDescriptor) as exc:
                raise FormatError(f"{where}: class_hierarchy[{i}]", str(exc)) from None
        return reg


def load_registry(path: str | os.PathLike) -> Registry:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise FormatError(str(path), "empty registry file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}", exc.msg) from None
    return Registry.from_json(data, where=str(path))


def save_registry(r: Registry, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(r.to_json(), fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def register(r: Registry, d: ServiceDescriptor) -> Registry:
    return r.register(d)


def find_by_predicate(r: Registry, p, direction=None) -> list[ServiceDescriptor]:
    return r.find_by_predicate(p, direction)


def find_by_class(r: Registry, c, side) -> list[ServiceDescriptor]:
    return r.find_by_class(c, side)
