"""Query planning: decide how each triple pattern gets its data.

Every pattern becomes one :class:`PatternStep`:

* ``ClassExpansion`` for ``?x rdf:type C`` when C is a defined class; the
  step carries a nested plan for the patterns C expands to.
* ``Forward`` when the subject is known (constant or bound by an earlier
  step) and services annotated with the predicate consume subjects.
* ``Inverse`` when the object is known and services consume objects.
* ``LocalOnly`` when no service carries the predicate.

Ordering is greedy: the cheapest step that can run is taken next. Input
cardinality is estimated crudely: a constant is 1, a variable bound by an
earlier step keeps the estimate of that step, a fresh variable is infinite
unless the seed store holds instances of the service's input class. When
both directions are possible the smaller input wins and ties go to Inverse,
since one inverse call beats enumerating every candidate subject.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

from share.errors import UnresolvablePattern
from share.ontology import Ontology, defined_class_of, expand_class
from share.rdf import IRI, Graph, Literal, Term, Variable
from share.registry import Direction, Registry, ServiceDescriptor
from share.sparql import Query, TriplePattern

logger = logging.getLogger(__name__)

INF = math.inf
# assumed answer count per input when propagating estimates
FANOUT = 1
# estimate for variables bound by a LocalOnly step when no store is known
DEFAULT_LOCAL_ESTIMATE = 100


class Strategy(str, enum.Enum):
    LOCAL_ONLY = "LocalOnly"
    FORWARD = "Forward"
    INVERSE = "Inverse"
    CLASS_EXPANSION = "ClassExpansion"


@dataclass(frozen=True)
class PatternStep:
    pattern: TriplePattern
    strategy: Strategy
    rank: int
    services: tuple[str, ...] = ()
    class_iri: str | None = None
    substeps: tuple["PatternStep", ...] = ()
    input_estimate: float = 0
    estimated_calls: int = 0
    blocked: bool = False

    @property
    def input_side(self) -> str | None:
        if self.strategy is Strategy.FORWARD:
            return "subject"
        if self.strategy is Strategy.INVERSE:
            return "object"
        return None

    def input_term(self) -> Term | None:
        side = self.input_side
        return getattr(self.pattern, side) if side else None

    def evaluation_patterns(self) -> list[TriplePattern]:
        if self.strategy is Strategy.CLASS_EXPANSION:
            return [p for s in self.substeps for p in s.evaluation_patterns()]
        return [self.pattern]

    def leaves(self) -> list["PatternStep"]:
        if self.strategy is Strategy.CLASS_EXPANSION:
            return [leaf for s in self.substeps for leaf in s.leaves()]
        return [self]


@dataclass
class QueryPlan:
    query: Query
    steps: tuple[PatternStep, ...]
    warnings: list[str] = field(default_factory=list)
    unresolvable: list[TriplePattern] = field(default_factory=list)

    @property
    def estimated_calls(self) -> dict[int, int]:
        return {s.rank: s.estimated_calls for s in self.steps}

    def evaluation_patterns(self) -> list[TriplePattern]:
        """The BGP evaluated on the store, in plan order, classes expanded."""
        out: dict[TriplePattern, None] = {}
        for s in self.steps:
            for p in s.evaluation_patterns():
                out.setdefault(p)
        return list(out)

    def leaves(self) -> list[PatternStep]:
        return [leaf for s in self.steps for leaf in s.leaves()]


@dataclass
class _Candidate:
    index: int
    pattern: TriplePattern
    strategy: Strategy
    services: tuple[str, ...] = ()
    cost: float = 0
    blocked: bool = False
    class_iri: str | None = None
    subplan: list | None = None
    bound_after: dict | None = None

    def key(self):
        return (self.blocked, self.cost, self.index)


class _Planner:
    def __init__(self, registry: Registry, onto: Ontology | None, store: Graph | None):
        self.registry = registry
        self.onto = onto
        self.store = store

    def term_cardinality(self, term: Term, bound: dict[str, float],
                         services: list[ServiceDescriptor]) -> float:
        if isinstance(term, IRI):
            return 1
        if isinstance(term, Literal):
            return INF
        if term.name in bound:
            return bound[term.name]
        if self.store is not None and services:
            classes: set[str] = set()
            for d in services:
                classes |= {d.input_class} | self.registry.subclasses(d.input_class)
            n = len(self.store.instances_of(classes))
            if n:
                return n
        return INF

    def candidate(self, index: int, pattern: TriplePattern, bound: dict[str, float]) -> _Candidate:
        cls = defined_class_of(pattern, self.onto)
        if cls is not None:
            subs = expand_class(self.onto, cls, pattern.subject)
            inner = dict(bound)
            subplan = self.greedy(list(enumerate(subs)), inner)
            blocked = any(c.blocked for c in subplan)
            cost = subplan[0].cost if subplan else 0
            return _Candidate(index, pattern, Strategy.CLASS_EXPANSION, cost=cost, blocked=blocked,
                              class_iri=cls, subplan=subplan, bound_after=inner)

        pred = pattern.predicate
        forward = inverse = []
        if isinstance(pred, IRI):
            forward = self.registry.find_by_predicate(pred, Direction.FORWARD)
            inverse = self.registry.find_by_predicate(pred, Direction.INVERSE)
        if not forward and not inverse:
            blocked = self.local_blocked(pattern, bound)
            return _Candidate(index, pattern, Strategy.LOCAL_ONLY, cost=0, blocked=blocked)

        subj = self.term_cardinality(pattern.subject, bound, forward) if forward else INF
        obj = self.term_cardinality(pattern.object, bound, inverse) if inverse else INF
        fwd_ids = tuple(d.id for d in forward)
        inv_ids = tuple(d.id for d in inverse)
        if obj < INF and obj <= subj:
            return _Candidate(index, pattern, Strategy.INVERSE, inv_ids, cost=obj)
        if subj < INF:
            return _Candidate(index, pattern, Strategy.FORWARD, fwd_ids, cost=subj)
        if forward:
            return _Candidate(index, pattern, Strategy.FORWARD, fwd_ids, cost=INF, blocked=True)
        return _Candidate(index, pattern, Strategy.INVERSE, inv_ids, cost=INF, blocked=True)

    def local_blocked(self, pattern: TriplePattern, bound: dict[str, float]) -> bool:
        if self.store is None:
            return False
        ends = (pattern.subject, pattern.object)
        if not all(isinstance(t, Variable) and t.name not in bound for t in ends):
            return False
        if isinstance(pattern.predicate, IRI):
            return not self.store.has_predicate(pattern.predicate)
        return len(self.store) == 0

    def bind(self, chosen: _Candidate, bound: dict[str, float]) -> None:
        if chosen.strategy is Strategy.CLASS_EXPANSION:
            bound.update(chosen.bound_after)
            return
        if chosen.blocked:
            return
        p = chosen.pattern
        if chosen.strategy is Strategy.LOCAL_ONLY:
            if self.store is None:
                produced = DEFAULT_LOCAL_ESTIMATE
            else:
                pred = p.predicate if isinstance(p.predicate, IRI) else None
                produced = max(1, self.store.count(None, pred, None))
        else:
            produced = chosen.cost * FANOUT
        for name in sorted(p.variables()):
            bound[name] = min(bound.get(name, INF), produced)

    def greedy(self, indexed: list[tuple[int, TriplePattern]], bound: dict[str, float]) -> list[_Candidate]:
        remaining = list(indexed)
        chosen_list: list[_Candidate] = []
        while remaining:
            cands = [self.candidate(i, p, bound) for i, p in remaining]
            best = min(cands, key=_Candidate.key)
            chosen_list.append(best)
            remaining = [(i, p) for i, p in remaining if i != best.index]
            self.bind(best, bound)
        return chosen_list

    def to_steps(self, chosen: list[_Candidate], warnings: list[str],
                 unresolvable: list[TriplePattern]) -> tuple[PatternStep, ...]:
        steps = []
        for rank, c in enumerate(chosen, start=1):
            if c.strategy is Strategy.CLASS_EXPANSION:
                subs = self.to_steps(c.subplan, warnings, unresolvable)
                steps.append(PatternStep(
                    c.pattern, c.strategy, rank, class_iri=c.class_iri, substeps=subs,
                    input_estimate=c.cost, estimated_calls=sum(s.estimated_calls for s in subs),
                    blocked=any(s.blocked for s in subs)))
                continue
            if c.blocked:
                unresolvable.append(c.pattern)
                warnings.append(f"unresolvable pattern {c.pattern.n3()}: no binding source for its variables")
            steps.append(PatternStep(
                c.pattern, c.strategy, rank, services=c.services, input_estimate=c.cost,
                estimated_calls=len(c.services), blocked=c.blocked))
        return tuple(steps)


def plan(q: Query, r: Registry, onto: Ontology | None = None, store: Graph | None = None) -> QueryPlan:
    """Order and classify the patterns of ``q``.

    ``store`` is optional; when given it lets fresh variables be estimated
    from the typed individuals already known locally, and lets local-only
    patterns be checked for resolvability. Unresolvable patterns are
    reported as warnings on the plan and raised by the engine on execution.
    """
    planner = _Planner(r, onto, store)
    chosen = planner.greedy(list(enumerate(q.patterns)), {})
    warnings: list[str] = []
    unresolvable: list[TriplePattern] = []
    steps = planner.to_steps(chosen, warnings, unresolvable)
    for w in warnings:
        logger.warning(w)
    return QueryPlan(q, steps, warnings, unresolvable)


def require_resolvable(p: QueryPlan) -> None:
    if p.unresolvable:
        raise UnresolvablePattern(p.unresolvable[0])


def _calls(n: int) -> str:
    return f"est. {n} call" + ("" if n == 1 else "s")


def _render(step: PatternStep, label: str, indent: str, lines: list[str]) -> None:
    head = f"{indent}{label}. {step.pattern.n3()}"
    if step.strategy is Strategy.CLASS_EXPANSION:
        n = len(step.evaluation_patterns())
        lines.append(f"{head}  ->  ClassExpansion of <{step.class_iri}> into {n} "
                     f"pattern{'' if n == 1 else 's'} ({_calls(step.estimated_calls)})")
        for sub in step.substeps:
            _render(sub, f"{label}.{sub.rank}", indent + "    ", lines)
        return
    if step.strategy is Strategy.LOCAL_ONLY:
        lines.append(f"{head}  ->  LocalOnly (local store, {_calls(0)})")
        return
    services = ", ".join(f"<{s}>" for s in step.services)
    note = ", unresolvable" if step.blocked else ""
    lines.append(f"{head}  ->  {step.strategy.value} via {services} ({_calls(step.estimated_calls)}{note})")


def explain(p: QueryPlan) -> str:
    """Deterministic listing: one line per step, nested lines for expansions."""
    lines: list[str] = []
    for step in p.steps:
        _render(step, str(step.rank), "", lines)
    for w in p.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"
