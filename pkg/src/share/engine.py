"""Query resolution over web services.

Resolution runs in three phases:

1. plan the query (:mod:`share.planner`),
2. execute each planned step in order, POSTing the step's input terms to
   every planned service and ingesting the N-Triples answers into the
   local store,
3. evaluate the basic graph pattern on the local store by nested-loop join.

Within one resolve, a ``(service, input)`` pair is sent at most once.
"""

from __future__ import annotations

import enum
import socket
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from share.errors import (
    BadPayload, BudgetExceeded, NTriplesError, ServiceError, ServiceFailure, ServiceHttpError,
    ServiceTimeout, UnresolvablePattern,
)
from share.ontology import Ontology
from share.planner import PatternStep, QueryPlan, Strategy, plan as make_plan
from share.rdf import IRI, RDF_TYPE, Graph, Literal, Term, Triple, Variable, parse_ntriples, serialize_ntriples
from share.registry import Direction, Registry, ServiceDescriptor
from share.sparql import Query, TriplePattern

NTRIPLES = "application/n-triples"

DEFAULT_TIMEOUT = 10.0
DEFAULT_PARALLELISM = 8
DEFAULT_CALL_BUDGET = 10_000


class FailurePolicy(str, enum.Enum):
    FAIL_FAST = "FailFast"
    BEST_EFFORT = "BestEffort"


class Outcome(str, enum.Enum):
    OK = "Ok"
    TIMEOUT = "Timeout"
    HTTP_ERROR = "HttpError"
    BAD_PAYLOAD = "BadPayload"


@dataclass(frozen=True)
class InvocationRecord:
    service_id: str
    inputs: frozenset[IRI]
    triples_returned: int
    duration: float
    outcome: Outcome
    status: int | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.OK

    @property
    def outcome_text(self) -> str:
        if self.outcome is Outcome.HTTP_ERROR:
            code = self.status if self.status is not None else "connection failed"
            return f"HttpError({code})"
        return self.outcome.value

    def to_json(self, timings: bool = False) -> dict:
        out = {
            "service": self.service_id,
            "inputs": sorted(i.value for i in self.inputs),
            "triples_returned": self.triples_returned,
            "outcome": self.outcome_text,
        }
        if self.message:
            out["message"] = self.message
        if timings:
            out["duration"] = round(self.duration, 6)
        return out


class InvocationCache:
    """Cross-resolve cache of service answers keyed by (service id, input IRI)."""

    def __init__(self, ttl: float, clock=time.monotonic):
        self.ttl = ttl
        self.clock = clock
        self._entries: dict[tuple[str, IRI], tuple[float, tuple[Triple, ...]]] = {}
        self._lock = threading.Lock()

    def get(self, service_id: str, term: IRI) -> tuple[Triple, ...] | None:
        with self._lock:
            hit = self._entries.get((service_id, term))
            if hit is None:
                return None
            expires, triples = hit
            if self.clock() >= expires:
                del self._entries[(service_id, term)]
                return None
            return triples

    def put(self, service_id: str, term: IRI, triples: Iterable[Triple]) -> None:
        with self._lock:
            self._entries[(service_id, term)] = (self.clock() + self.ttl, tuple(triples))

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class ResolveOptions:
    failure_policy: FailurePolicy = FailurePolicy.FAIL_FAST
    timeout: float = DEFAULT_TIMEOUT
    parallelism: int = DEFAULT_PARALLELISM
    call_budget: int = DEFAULT_CALL_BUDGET
    batch_size: int | None = None
    retry_on_timeout: bool = False
    cache: InvocationCache | None = None

    @property
    def best_effort(self) -> bool:
        return self.failure_policy is FailurePolicy.BEST_EFFORT


@dataclass
class SolutionTable:
    vars: tuple[str, ...]
    rows: list[dict[str, Term]] = field(default_factory=list)
    incomplete: bool = False

    def as_set(self) -> set[tuple[Term, ...]]:
        return {tuple(r[v] for v in self.vars) for r in self.rows}

    def column(self, var: str) -> list[Term]:
        return [r[var] for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def project(self, select: Iterable[str], distinct: bool = False, limit: int | None = None) -> "SolutionTable":
        select = tuple(select)
        rows = [{v: r[v] for v in select} for r in self.rows if all(v in r for v in select)]
        if distinct:
            rows = list({tuple(r[v] for v in select): r for r in rows}.values())
        rows.sort(key=lambda r: tuple(r[v].n3() for v in select))
        if limit is not None:
            rows = rows[:limit]
        return SolutionTable(select, rows, self.incomplete)

    def to_json(self) -> dict:
        return {
            "vars": list(self.vars),
            "rows": [{v: r[v].n3() for v in self.vars} for r in self.rows],
            "incomplete": self.incomplete,
        }


# -- local BGP evaluation ------------------------------------------------------

# pattern -> (input side, input terms whose service call failed)
Relaxation = Mapping[TriplePattern, tuple[str, set]]


def _extend(mu: dict, pattern: TriplePattern, t: Triple) -> dict | None:
    out = dict(mu)
    for pos, value in zip(pattern, t):
        if isinstance(pos, Variable):
            have = out.get(pos.name)
            if have is None:
                out[pos.name] = value
            elif have != value:
                return None
    return out


def join(store: Graph, patterns: Iterable[TriplePattern], relax: Relaxation | None = None) -> list[dict[str, Term]]:
    """Left-to-right nested-loop join; each step is one index lookup per row.

    ``relax`` marks patterns whose service call failed for some inputs: a
    row whose input term is among those failures is kept (the pattern is
    unknown for it rather than false).
    """
    rows: list[dict[str, Term]] = [{}]
    for pattern in patterns:
        unknown = relax.get(pattern) if relax else None
        nxt = []
        for mu in rows:
            bound = pattern.substitute(mu)
            found = False
            for t in store.match(bound.subject, bound.predicate, bound.object):
                ext = _extend(mu, bound, t)
                if ext is not None:
                    nxt.append(ext)
                    found = True
            if not found and unknown is not None:
                side, failed = unknown
                if getattr(bound, side) in failed:
                    nxt.append(mu)
        rows = nxt
        if not rows:
            break
    return rows


def evaluate_bgp(store: Graph, patterns: Iterable[TriplePattern], relax: Relaxation | None = None) -> SolutionTable:
    """Standard BGP semantics over ``store``; an empty pattern list yields one empty row."""
    patterns = list(patterns)
    names: list[str] = []
    for p in patterns:
        for t in p:
            if isinstance(t, Variable) and t.name not in names:
                names.append(t.name)
    rows = join(store, patterns, relax)
    rows = [r for r in rows if all(n in r for n in names)]
    rows.sort(key=lambda r: tuple(r[n].n3() for n in names))
    return SolutionTable(tuple(names), rows)


# -- service invocation --------------------------------------------------------

def request_body(d: ServiceDescriptor, inputs: Iterable[IRI]) -> str:
    rdf_type = IRI(RDF_TYPE)
    cls = IRI(d.input_class)
    return serialize_ntriples(Triple(i, rdf_type, cls) for i in inputs)


def invoke_service(d: ServiceDescriptor, inputs: Iterable[IRI], timeout: float = DEFAULT_TIMEOUT) -> Graph:
    """POST ``inputs`` to ``d`` and return its answer as a Graph.

    Predicate triples in the answer are always subject -> object, for
    Inverse services too. Raises :class:`ServiceTimeout`,
    :class:`ServiceHttpError` or :class:`BadPayload`.
    """
    inputs = frozenset(inputs)
    if not inputs:
        raise ValueError("invoke_service needs at least one input")
    body = request_body(d, sorted(inputs)).encode("utf-8")
    req = urllib.request.Request(
        d.endpoint, data=body, method="POST",
        headers={"Content-Type": NTRIPLES, "Accept": NTRIPLES})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            status = resp.status
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise ServiceHttpError(d.id, exc.code) from None
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise ServiceTimeout(d.id, f"no answer within {timeout:g} s") from None
        raise ServiceHttpError(d.id, None, str(exc.reason)) from None
    except (socket.timeout, TimeoutError):
        raise ServiceTimeout(d.id, f"no answer within {timeout:g} s") from None
    except (ConnectionError, OSError) as exc:
        raise ServiceHttpError(d.id, None, str(exc)) from None
    if status != 200:
        raise ServiceHttpError(d.id, status)
    try:
        g = parse_ntriples(payload, source=d.id)
    except NTriplesError as exc:
        raise BadPayload(d.id, f"response is not N-Triples: {exc}") from None
    side = "subject" if d.direction is Direction.FORWARD else "object"
    for t in g:
        if t.predicate.value in d.predicates and getattr(t, side) not in inputs:
            raise BadPayload(d.id, f"answer {t.n3()} does not concern any input")
    return g


def _attribute(d: ServiceDescriptor, g: Graph, term: IRI) -> list[Triple]:
    """Triples of a batch answer that belong to one input (for caching)."""
    side, other = ("subject", "object") if d.direction is Direction.FORWARD else ("object", "subject")
    mine = [t for t in g if t.predicate.value in d.predicates and getattr(t, side) == term]
    related = {getattr(t, other) for t in mine} | {term}
    extra = [t for t in g if t.predicate.value not in d.predicates and t.subject in related]
    return mine + extra


# -- engine --------------------------------------------------------------------

class Engine:
    """Executes query plans against a registry, ingesting into one store.

    One engine serves one logical query at a time; several engines may
    share a registry but not a store.
    """

    def __init__(self, registry: Registry, ontology: Ontology | None = None,
                 store: Graph | None = None, options: ResolveOptions | None = None):
        self.registry = registry
        self.ontology = ontology if ontology is not None else Ontology()
        self.store = store if store is not None else Graph()
        self.options = options or ResolveOptions()
        self.reset()

    def reset(self) -> None:
        """Start a new resolution session (clears memo, records and counters)."""
        self.records: list[InvocationRecord] = []
        self.sent: set[tuple[str, IRI]] = set()
        self.failed: set[tuple[str, IRI]] = set()
        self.calls = 0
        self.incomplete = False

    # invocation ---------------------------------------------------------------

    def _call(self, d: ServiceDescriptor, batch: tuple[IRI, ...]) -> list[tuple[InvocationRecord, Graph | None]]:
        out = []
        attempts = 2 if self.options.retry_on_timeout else 1
        for attempt in range(attempts):
            start = time.perf_counter()
            try:
                g = invoke_service(d, batch, self.options.timeout)
            except ServiceError as exc:
                rec = InvocationRecord(d.id, frozenset(batch), 0, time.perf_counter() - start,
                                       Outcome(exc.outcome), getattr(exc, "status", None), str(exc))
                out.append((rec, None))
                if isinstance(exc, ServiceTimeout) and attempt + 1 < attempts:
                    continue
                return out
            rec = InvocationRecord(d.id, frozenset(batch), len(g), time.perf_counter() - start, Outcome.OK)
            out.append((rec, g))
            return out
        return out

    def _batches(self, inputs: list[IRI]) -> list[tuple[IRI, ...]]:
        size = self.options.batch_size
        if not size or size >= len(inputs):
            return [tuple(inputs)] if inputs else []
        return [tuple(inputs[i:i + size]) for i in range(0, len(inputs), size)]

    def fetch(self, requests: Mapping[str, Iterable[IRI]]) -> dict[str, set[IRI]]:
        """Send each service its inputs (minus already-sent ones) and ingest.

        Returns, per service id, the inputs whose call failed in this
        session (including earlier failures of memoized inputs).
        """
        plan: dict[str, list[tuple[IRI, ...]]] = {}
        failed: dict[str, set[IRI]] = {}
        cache = self.options.cache
        for sid in sorted(requests):
            d = self.registry.get(sid)
            todo = []
            for term in sorted(set(requests[sid])):
                if not isinstance(term, IRI):
                    continue
                key = (sid, term)
                if key in self.sent:
                    if key in self.failed:
                        failed.setdefault(sid, set()).add(term)
                    continue
                if cache is not None:
                    hit = cache.get(sid, term)
                    if hit is not None:
                        self.sent.add(key)
                        self.store.add_all(hit, source=sid)
                        continue
                todo.append(term)
            batches = self._batches(todo)
            if batches:
                plan[sid] = batches
        needed = sum(len(b) for b in plan.values())
        if self.calls + needed > self.options.call_budget:
            raise BudgetExceeded(self.options.call_budget, self.calls + needed)
        if not plan:
            return failed
        for sid, batches in plan.items():
            for b in batches:
                self.sent.update((sid, t) for t in b)

        def run(sid: str):
            d = self.registry.get(sid)
            results = []
            for b in plan[sid]:
                results.extend(self._call(d, b))
            return results

        workers = max(1, min(self.options.parallelism, len(plan)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {sid: pool.submit(run, sid) for sid in plan}
            outcomes = {sid: f.result() for sid, f in futures.items()}

        first_failure = None
        for sid in sorted(outcomes):
            d = self.registry.get(sid)
            for rec, g in outcomes[sid]:
                self.records.append(rec)
                self.calls += 1
                if g is not None:
                    self.store.update(g, source=sid)
                    if cache is not None:
                        for term in rec.inputs:
                            cache.put(sid, term, _attribute(d, g, term))
                    for term in rec.inputs:
                        failed.get(sid, set()).discard(term)
                        self.failed.discard((sid, term))
                else:
                    failed.setdefault(sid, set()).update(rec.inputs)
                    self.failed.update((sid, t) for t in rec.inputs)
                    if first_failure is None:
                        first_failure = rec
        # a retried call that later succeeded is not a failure
        failed = {sid: terms for sid, terms in failed.items() if terms}
        if first_failure is not None and failed:
            if not self.options.best_effort:
                raise ServiceFailure(first_failure, self.records)
            self.incomplete = True
        return failed

    # plan execution -------------------------------------------------------------

    def _candidates(self, var: str, executed: list[TriplePattern], relax: Relaxation) -> set[Term]:
        """Values of ``var`` allowed by the executed patterns connected to it."""
        component: list[TriplePattern] = []
        reach = {var}
        changed = True
        pending = list(executed)
        while changed:
            changed = False
            for p in list(pending):
                if p.variables() & reach:
                    component.append(p)
                    reach |= p.variables()
                    pending.remove(p)
                    changed = True
        ordered = [p for p in executed if p in component]
        return {r[var] for r in join(self.store, ordered, relax) if var in r}

    def _execute_leaf(self, step: PatternStep, executed: list[TriplePattern], relax: dict) -> None:
        pattern = step.pattern
        bound_vars = set().union(*(p.variables() for p in executed)) if executed else set()
        if step.strategy is Strategy.LOCAL_ONLY:
            if step.blocked:
                ends = (pattern.subject, pattern.object)
                unbound = all(isinstance(t, Variable) and t.name not in bound_vars for t in ends)
                pred = pattern.predicate
                empty = (not self.store.has_predicate(pred)) if isinstance(pred, IRI) else len(self.store) == 0
                if unbound and empty:
                    raise UnresolvablePattern(pattern)
            return

        term = step.input_term()
        side = step.input_side
        requests: dict[str, set[IRI]] = {}
        if isinstance(term, IRI):
            requests = {sid: {term} for sid in step.services}
        elif isinstance(term, Variable):
            if term.name in bound_vars:
                values = {v for v in self._candidates(term.name, executed, relax) if isinstance(v, IRI)}
                requests = {sid: values for sid in step.services}
            else:
                for sid in step.services:
                    d = self.registry.get(sid)
                    classes = {d.input_class} | self.registry.subclasses(d.input_class)
                    requests[sid] = self.store.instances_of(classes)
                if not any(requests.values()):
                    raise UnresolvablePattern(pattern, f"no known individuals to send to {step.strategy.value} services")
        elif isinstance(term, Literal):
            return
        failed = self.fetch(requests)
        if failed:
            terms = set().union(*failed.values())
            prev_side, prev = relax.get(pattern, (side, set()))
            relax[pattern] = (side, prev | terms)

    def execute(self, qplan: QueryPlan) -> tuple[SolutionTable, list[InvocationRecord]]:
        executed: list[TriplePattern] = []
        relax: dict[TriplePattern, tuple[str, set]] = {}
        for step in qplan.steps:
            for leaf in step.leaves():
                self._execute_leaf(leaf, executed, relax)
                executed.append(leaf.pattern)
        q = qplan.query
        full = evaluate_bgp(self.store, qplan.evaluation_patterns(), relax if self.options.best_effort else None)
        table = full.project(q.select_vars, q.distinct, q.limit)
        table.incomplete = self.incomplete
        return table, list(self.records)

    def plan(self, q: Query) -> QueryPlan:
        return make_plan(q, self.registry, self.ontology, self.store)

    def resolve(self, q: Query) -> tuple[SolutionTable, list[InvocationRecord]]:
        self.reset()
        return self.execute(self.plan(q))


def resolve(q: Query, r: Registry, onto: Ontology | None = None, store: Graph | None = None,
            opts: ResolveOptions | None = None) -> tuple[SolutionTable, list[InvocationRecord]]:
    """Plan and execute ``q``; returns the solution table and every invocation made."""
    return Engine(r, onto, store, opts).resolve(q)
