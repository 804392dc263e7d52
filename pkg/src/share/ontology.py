"""OWL-lite class definitions: named primitives, intersectionOf and hasValue.

Ontology files are JSON::

    {
      "primitives": ["http://share/Protein"],
      "classes": [
        {"id": "http://share/ParkinsonTranscriptionFactor",
         "intersection_of": ["..."],
         "has_value": [{"property": "...", "iri": "..."},
                       {"property": "...", "literal": "42", "datatype": "..."}]}
      ]
    }

Any other OWL restriction (someValuesFrom, allValuesFrom, cardinality, ...)
is rejected with :class:`UnsupportedConstruct`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from share.errors import CyclicDefinition, FormatError, OntologyError, UndefinedClass, UnsupportedConstruct
from share.rdf import IRI, RDF_TYPE, Literal, Term, Variable
from share.sparql import TriplePattern

UNSUPPORTED_KEYS = {
    "some_values_from": "someValuesFrom",
    "somevaluesfrom": "someValuesFrom",
    "all_values_from": "allValuesFrom",
    "allvaluesfrom": "allValuesFrom",
    "cardinality": "cardinality",
    "min_cardinality": "minCardinality",
    "mincardinality": "minCardinality",
    "max_cardinality": "maxCardinality",
    "maxcardinality": "maxCardinality",
    "qualified_cardinality": "qualifiedCardinality",
    "union_of": "unionOf",
    "unionof": "unionOf",
    "complement_of": "complementOf",
    "complementof": "complementOf",
    "one_of": "oneOf",
    "oneof": "oneOf",
    "has_self": "hasSelf",
    "hasself": "hasSelf",
}


@dataclass(frozen=True)
class ClassDefinition:
    id: str
    intersection_of: tuple[str, ...] = ()
    has_value: tuple[tuple[str, Term], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intersection_of", tuple(self.intersection_of))
        object.__setattr__(self, "has_value", tuple((p, v) for p, v in self.has_value))
        IRI(self.id)
        if not self.intersection_of and not self.has_value:
            raise OntologyError(f"class <{self.id}> has neither intersection_of nor has_value")
        for p, v in self.has_value:
            IRI(p)
            if not isinstance(v, (IRI, Literal)):
                raise OntologyError(f"hasValue of <{self.id}> must be an IRI or literal, got {v!r}")

    def to_json(self) -> dict:
        out: dict = {"id": self.id}
        if self.intersection_of:
            out["intersection_of"] = list(self.intersection_of)
        if self.has_value:
            values = []
            for p, v in self.has_value:
                if isinstance(v, IRI):
                    values.append({"property": p, "iri": v.value})
                else:
                    entry = {"property": p, "literal": v.value}
                    if v.datatype:
                        entry["datatype"] = v.datatype
                    values.append(entry)
            out["has_value"] = values
        return out


@dataclass
class Ontology:
    classes: dict[str, ClassDefinition] = field(default_factory=dict)
    primitives: frozenset[str] = frozenset()

    def __post_init__(self):
        if not isinstance(self.classes, dict):
            self.classes = {c.id: c for c in self.classes}
        self.primitives = frozenset(self.primitives)
        clash = self.primitives & set(self.classes)
        if clash:
            raise OntologyError(f"class <{min(clash)}> is both primitive and defined")
        for c in self.classes.values():
            for member in c.intersection_of:
                if member not in self.classes and member not in self.primitives:
                    raise OntologyError(
                        f"class <{c.id}> references <{member}>, which is neither defined nor primitive")
        self.topological_order()

    def is_defined(self, c: str | IRI) -> bool:
        c = c.value if isinstance(c, IRI) else c
        return c in self.classes

    def topological_order(self) -> list[str]:
        """Defined classes, each after every defined class it intersects."""
        order: list[str] = []
        state: dict[str, int] = {}

        def visit(c: str, path: list[str]):
            mark = state.get(c)
            if mark == 2:
                return
            if mark == 1:
                raise CyclicDefinition(path[path.index(c):] + [c])
            state[c] = 1
            for member in self.classes[c].intersection_of:
                if member in self.classes:
                    visit(member, path + [c])
            state[c] = 2
            order.append(c)

        for c in sorted(self.classes):
            visit(c, [])
        return order

    def to_json(self) -> dict:
        return {
            "primitives": sorted(self.primitives),
            "classes": [self.classes[c].to_json() for c in sorted(self.classes)],
        }

    @classmethod
    def from_json(cls, data, where: str = "ontology") -> "Ontology":
        if not isinstance(data, dict):
            raise FormatError(where, "top level must be a JSON object")
        unknown = set(data) - {"classes", "primitives"}
        if unknown:
            raise FormatError(where, f"unknown field {sorted(unknown)[0]!r}")
        classes: dict[str, ClassDefinition] = {}
        for i, entry in enumerate(data.get("classes", [])):
            loc = f"{where}: classes[{i}]"
            if not isinstance(entry, dict) or "id" not in entry:
                raise FormatError(loc, "each class needs an 'id'")
            for key in entry:
                construct = UNSUPPORTED_KEYS.get(key.lower())
                if construct:
                    raise UnsupportedConstruct(construct, f"class <{entry['id']}>")
            extra = set(entry) - {"id", "intersection_of", "has_value", "label", "comment"}
            if extra:
                raise FormatError(loc, f"unknown field {sorted(extra)[0]!r}")
            if entry["id"] in classes:
                raise FormatError(loc, f"duplicate class id {entry['id']!r}")
            try:
                values = [_value_from_json(v, f"{loc}.has_value[{j}]")
                          for j, v in enumerate(entry.get("has_value", []))]
                classes[entry["id"]] = ClassDefinition(
                    entry["id"], tuple(entry.get("intersection_of", [])), tuple(values))
            except (OntologyError, ValueError) as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(loc, str(exc)) from None
        try:
            return cls(classes, frozenset(data.get("primitives", [])))
        except OntologyError as exc:
            raise FormatError(where, str(exc)) from None


def _value_from_json(entry, loc: str) -> tuple[str, Term]:
    if not isinstance(entry, dict) or "property" not in entry:
        raise FormatError(loc, "hasValue entries need a 'property'")
    if "iri" in entry:
        return entry["property"], IRI(entry["iri"])
    if "literal" in entry:
        return entry["property"], Literal(str(entry["literal"]), entry.get("datatype"))
    raise FormatError(loc, "hasValue entries need an 'iri' or a 'literal'")


def load_ontology(path: str | os.PathLike) -> Ontology:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise FormatError(str(path), "empty ontology file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}", exc.msg) from None
    return Ontology.from_json(data, where=str(path))


def save_ontology(onto: Ontology, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(onto.to_json(), fh, indent=2)
        fh.write("\n")


def expand_class(onto: Ontology, c: str | IRI, subject: str | Term) -> list[TriplePattern]:
    """Flatten a defined class into the triple patterns its members must satisfy.

    Intersections are expanded depth-first in definition order; every
    hasValue (p, v) becomes ``(subject, p, v)`` and every primitive class P
    reached becomes ``(subject, rdf:type, P)``. Duplicates are dropped.
    """
    c = c.value if isinstance(c, IRI) else c
    if isinstance(subject, str):
        subject = Variable(subject.lstrip("?"))
    if c not in onto.classes:
        raise UndefinedClass(c)
    out: dict[TriplePattern, None] = {}
    rdf_type = IRI(RDF_TYPE)

    def walk(name: str, path: list[str]):
        if name in path:
            raise CyclicDefinition(path[path.index(name):] + [name])
        definition = onto.classes[name]
        for member in definition.intersection_of:
            if member in onto.classes:
                walk(member, path + [name])
            else:
                out.setdefault(TriplePattern(subject, rdf_type, IRI(member)))
        for p, v in definition.has_value:
            out.setdefault(TriplePattern(subject, IRI(p), v))

    walk(c, [])
    return list(out)


def defined_class_of(pattern: TriplePattern, onto: Ontology | None) -> str | None:
    """The defined class named by an ``rdf:type`` pattern, if any."""
    if onto is None:
        return None
    if pattern.predicate == IRI(RDF_TYPE) and isinstance(pattern.object, IRI) and onto.is_defined(pattern.object):
        return pattern.object.value
    return None


def rewrite_patterns(patterns, onto: Ontology | None) -> list[TriplePattern]:
    """Replace each rdf:type-of-defined-class pattern by its expansion."""
    out: dict[TriplePattern, None] = {}
    for p in patterns:
        c = defined_class_of(p, onto)
        if c is None:
            out.setdefault(p)
        else:
            for sub in expand_class(onto, c, p.subject):
                out.setdefault(sub)
    return list(out)
