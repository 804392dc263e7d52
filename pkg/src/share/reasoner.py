"""Instance retrieval, membership tests and ontology lifting via services.

Membership is closed over what the services return: ``False`` means "not
derivable from retrieved triples", and in BestEffort mode a restriction
whose service failed yields ``None`` (unknown) instead.
"""

from __future__ import annotations

from typing import Iterable

from share.engine import Engine, ResolveOptions
from share.ontology import Ontology, expand_class
from share.rdf import IRI, RDF_TYPE, Graph, Triple
from share.registry import Direction, Registry
from share.sparql import TriplePattern, make_query

REASONER = "reasoner"


def _iri(x: str | IRI) -> IRI:
    return x if isinstance(x, IRI) else IRI(x)


def instances(onto: Ontology, c: str | IRI, r: Registry, store: Graph | None = None,
              opts: ResolveOptions | None = None) -> set[IRI]:
    """Individuals of class ``c``, found by resolving its expanded patterns."""
    q = make_query(expand_class(onto, c, "x"), select=["x"], distinct=True)
    table, _ = Engine(r, onto, store, opts).resolve(q)
    return {t for t in table.column("x") if isinstance(t, IRI)}


def _holds(pattern: TriplePattern, store: Graph, r: Registry) -> bool:
    t = pattern.to_triple()
    if t in store:
        return True
    if t.predicate.value == RDF_TYPE and isinstance(t.object, IRI):
        for sub in r.subclasses(t.object.value):
            if Triple(t.subject, t.predicate, IRI(sub)) in store:
                return True
    return False


def is_instance(onto: Ontology, c: str | IRI, individual: str | IRI, r: Registry,
                store: Graph | None = None, opts: ResolveOptions | None = None,
                engine: Engine | None = None) -> bool | None:
    """Test membership of ``individual`` in ``c``, calling services as needed.

    Each restriction is first looked up in the store; if absent, the
    forward services of its property are asked about the individual (or,
    with only inverse services, about the required value), and the store
    is checked again.
    """
    individual = _iri(individual)
    eng = engine or Engine(r, onto, store, opts)
    patterns = expand_class(onto, c, individual)
    unknown = False
    for pattern in patterns:
        if _holds(pattern, eng.store, r):
            continue
        pred, value = pattern.predicate, pattern.object
        forward = r.find_by_predicate(pred, Direction.FORWARD)
        inverse = r.find_by_predicate(pred, Direction.INVERSE)
        failed = {}
        if forward:
            failed = eng.fetch({d.id: {individual} for d in forward})
        if not _holds(pattern, eng.store, r) and inverse and isinstance(value, IRI):
            failed.update(eng.fetch({d.id: {value} for d in inverse}))
        if _holds(pattern, eng.store, r):
            continue
        if failed:
            unknown = True
            continue
        return False
    return None if unknown else True


class LiftResult(Graph):
    """Graph of inferred ``rdf:type`` triples plus undecided memberships."""

    def __init__(self):
        super().__init__()
        self.unknown: list[tuple[str, IRI]] = []


def lift(onto: Ontology, individuals: Iterable[str | IRI], r: Registry, store: Graph | None = None,
         opts: ResolveOptions | None = None) -> LiftResult:
    """Classify every individual against every defined class.

    Inferred type statements are returned and also added to ``store``.
    Classes are visited in dependency order, composites after their parts.
    """
    eng = Engine(r, onto, store, opts)
    people = sorted({_iri(i) for i in individuals})
    out = LiftResult()
    rdf_type = IRI(RDF_TYPE)
    for c in onto.topological_order():
        for i in people:
            member = is_instance(onto, c, i, r, engine=eng)
            if member is True:
                out.add(Triple(i, rdf_type, IRI(c)), source=REASONER)
            elif member is None:
                out.unknown.append((c, i))
    eng.store.update(out, source=REASONER)
    return out

