"""``share`` command line: query, registry, classify, instances, serve-mocks.

Exit codes: 0 success, 1 user error (bad query, file or descriptor),
2 runtime/resolution failure (service failure, unresolvable pattern,
budget exceeded, port already in use).
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
from dataclasses import dataclass

from share import errors
from share.engine import (
    DEFAULT_CALL_BUDGET, DEFAULT_PARALLELISM, DEFAULT_TIMEOUT, Engine, FailurePolicy, InvocationCache,
    InvocationRecord, ResolveOptions, SolutionTable,
)
from share.harness import fixture_path, load_harness_config, shutdown_all, spawn
from share.ontology import Ontology, load_ontology
from share.planner import explain
from share.rdf import IRI, Graph, Variable, load_ntriples, serialize_ntriples
from share.reasoner import instances, lift
from share.registry import Direction, Registry, ServiceDescriptor, load_registry, save_registry
from share.sparql import parse_query

USER_ERRORS = (
    errors.QuerySyntaxError, errors.UnsupportedFeature, errors.FormatError, errors.InvalidDescriptor,
    errors.OntologyError, errors.NTriplesError, errors.RegistryError, OSError,
)
RUNTIME_ERRORS = (errors.ResolutionError, errors.BindError)


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for runtime failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class CliConfig:
    registry: str | None = None
    ontology: str | None = None
    store: str | None = None
    failure_policy: FailurePolicy = FailurePolicy.FAIL_FAST
    timeout: float = DEFAULT_TIMEOUT
    parallelism: int = DEFAULT_PARALLELISM
    cache_ttl: float | None = None
    batch_size: int | None = None
    call_budget: int = DEFAULT_CALL_BUDGET
    explain: bool = False
    format: str = "table"

    @classmethod
    def from_args(cls, args) -> "CliConfig":
        return cls(
            registry=getattr(args, "registry", None) or os.environ.get("SHARE_REGISTRY"),
            ontology=getattr(args, "ontology", None),
            store=getattr(args, "store", None),
            failure_policy=FailurePolicy.BEST_EFFORT if getattr(args, "best_effort", False) else FailurePolicy.FAIL_FAST,
            timeout=getattr(args, "timeout", DEFAULT_TIMEOUT),
            parallelism=getattr(args, "parallelism", DEFAULT_PARALLELISM),
            cache_ttl=getattr(args, "cache_ttl", None),
            batch_size=getattr(args, "batch_size", None),
            call_budget=getattr(args, "call_budget", DEFAULT_CALL_BUDGET),
            explain=getattr(args, "explain", False),
            format=getattr(args, "format", "table"),
        )

    def resolve_options(self) -> ResolveOptions:
        return ResolveOptions(
            failure_policy=self.failure_policy, timeout=self.timeout, parallelism=self.parallelism,
            call_budget=self.call_budget, batch_size=self.batch_size,
            cache=InvocationCache(self.cache_ttl) if self.cache_ttl else None)

    def load_registry(self) -> Registry:
        return load_registry(self.registry) if self.registry else Registry()

    def load_ontology(self) -> Ontology:
        return load_ontology(self.ontology) if self.ontology else Ontology()

    def load_store(self) -> Graph:
        return load_ntriples(self.store) if self.store else Graph()


# -- rendering ---------------------------------------------------------------------

def render_table(table: SolutionTable) -> str:
    header = list(table.vars)
    body = [[r[v].n3() for v in header] for r in table.rows]
    widths = [max([len(h)] + [len(row[i]) for row in body]) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in body]
    n = len(table.rows)
    footer = f"({n} row{'' if n == 1 else 's'}"
    if table.incomplete:
        footer += ", incomplete: some service calls failed"
    lines.append(footer + ")")
    return "\n".join(lines) + "\n"


def render_invocations(records: list[InvocationRecord]) -> str:
    lines = ["invocations:"]
    for r in records:
        lines.append(f"  <{r.service_id}>  {r.outcome_text}  inputs={len(r.inputs)}  triples={r.triples_returned}")
    if not records:
        lines.append("  (none)")
    return "\n".join(lines) + "\n"


def render_ntriples(table: SolutionTable, patterns) -> str:
    """Instantiate the query patterns for every row (CONSTRUCT-WHERE style)."""
    out = set()
    for row in table.rows:
        for p in patterns:
            bound = p.substitute(row)
            if any(isinstance(t, Variable) for t in bound):
                continue
            try:
                out.add(bound.to_triple())
            except TypeError:
                continue
    return serialize_ntriples(out)


# -- commands ------------------------------------------------------------------

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def cmd_query(args) -> int:
    cfg = CliConfig.from_args(args)
    query = parse_query(_read_text(args.query))
    engine = Engine(cfg.load_registry(), cfg.load_ontology(), cfg.load_store(), cfg.resolve_options())
    qplan = engine.plan(query)
    plan_text = explain(qplan)
    if cfg.explain and cfg.format == "table":
        sys.stdout.write(plan_text + "\n")
        sys.stdout.flush()
    try:
        table, records = engine.execute(qplan)
    except errors.ServiceFailure as exc:
        if cfg.explain:
            sys.stdout.write(render_invocations(exc.records))
        raise
    if cfg.format == "json":
        doc = table.to_json()
        doc["invocations"] = [r.to_json() for r in records]
        if cfg.explain:
            doc["plan"] = plan_text.splitlines()
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    elif cfg.format == "ntriples":
        sys.stdout.write(render_ntriples(table, query.patterns))
    else:
        sys.stdout.write(render_table(table))
        if cfg.explain:
            sys.stdout.write("\n" + render_invocations(records))
    return 0


def _registry_path(args) -> str:
    path = args.registry or os.environ.get("SHARE_REGISTRY")
    if not path:
        raise UsageError("no registry file: pass --registry or set SHARE_REGISTRY")
    return path


def cmd_registry(args) -> int:
    path = _registry_path(args)
    if args.action == "add":
        reg = load_registry(path) if os.path.exists(path) else Registry()
        d = ServiceDescriptor(
            id=args.id, endpoint=args.endpoint, input_class=args.input_class,
            output_class=args.output_class, predicates=frozenset(args.predicate or ()),
            direction=Direction.parse(args.direction), provider=args.provider)
        reg.register(d)
        save_registry(reg, path)
        print(f"registered <{d.id}>")
        return 0
    reg = load_registry(path)
    if args.action == "list":
        for d in reg.descriptors():
            preds = ",".join(f"<{p}>" for p in sorted(d.predicates))
            print(f"<{d.id}>\t{d.direction.value}\t{preds}\t<{d.input_class}> -> <{d.output_class}>")
        return 0
    if args.id not in reg.services:
        raise UsageError(f"no service <{args.id}> in {path}")
    print(json.dumps(reg.get(args.id).to_json(), indent=2))
    return 0


def _read_individuals(path: str) -> list[IRI]:
    found = []
    for line in _read_text(path).splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("<") and line.endswith(">"):
            line = line[1:-1]
        try:
            found.append(IRI(line))
        except ValueError:
            raise UsageError(f"{path}: not an IRI: {line!r}") from None
    return found


def cmd_classify(args) -> int:
    cfg = CliConfig.from_args(args)
    onto = cfg.load_ontology()
    people = _read_individuals(args.individuals)
    result = lift(onto, people, cfg.load_registry(), cfg.load_store(), cfg.resolve_options())
    text = serialize_ntriples(result)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for c, i in result.unknown:
        print(f"share: membership of {i.n3()} in <{c}> unknown (service failure)", file=sys.stderr)
    return 0


def cmd_instances(args) -> int:
    cfg = CliConfig.from_args(args)
    onto = cfg.load_ontology()
    cls = args.cls[1:-1] if args.cls.startswith("<") else args.cls
    found = instances(onto, cls, cfg.load_registry(), cfg.load_store(), cfg.resolve_options())
    for term in sorted(found):
        print(term.n3())
    return 0


def cmd_serve_mocks(args) -> int:
    config = load_harness_config(args.config or fixture_path("harness.json"))
    services = config.services
    if args.ephemeral:
        for s in services:
            s.port = 0
    registry, handles = spawn(services, config.class_hierarchy)
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    old = {s: signal.signal(s, on_signal) for s in (signal.SIGINT, signal.SIGTERM)}
    try:
        if args.registry_out:
            save_registry(registry, args.registry_out)
        print(json.dumps(registry.to_json(), indent=2), flush=True)
        while not stop.wait(0.2):
            pass
    finally:
        shutdown_all(handles)
        for s, h in old.items():
            signal.signal(s, h)
    print("mock services stopped", file=sys.stderr)
    return 0


# -- argument parsing -------------------------------------------------------------

def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _positive_float(text: str) -> float:
    x = float(text)
    if x <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="share", description="SPARQL queries and OWL classification resolved by web services.")
    sub = parser.add_subparsers(dest="command", required=True)

    resolve_flags = _ArgumentParser(add_help=False)
    resolve_flags.add_argument("--registry", help="registry JSON (default: $SHARE_REGISTRY)")
    resolve_flags.add_argument("--ontology", help="ontology JSON")
    resolve_flags.add_argument("--store", help="seed N-Triples loaded into the local store")
    resolve_flags.add_argument("--best-effort", action="store_true", help="skip failing service calls instead of aborting")
    resolve_flags.add_argument("--timeout", type=_positive_float, default=DEFAULT_TIMEOUT, help="per-call timeout in seconds")
    resolve_flags.add_argument("--parallelism", type=_positive_int, default=DEFAULT_PARALLELISM)
    resolve_flags.add_argument("--cache-ttl", type=_positive_float, default=None, help="cache service answers for this many seconds")
    resolve_flags.add_argument("--batch-size", type=_positive_int, default=None, help="max inputs per service request")
    resolve_flags.add_argument("--call-budget", type=_positive_int, default=DEFAULT_CALL_BUDGET)

    q = sub.add_parser("query", parents=[resolve_flags], help="resolve a query file ('-' for stdin)")
    q.add_argument("query")
    q.add_argument("--explain", action="store_true", help="print the plan and invocation summary")
    q.add_argument("--format", choices=["table", "json", "ntriples"], default="table")
    q.set_defaults(func=cmd_query)

    reg = sub.add_parser("registry", help="inspect or edit a registry file")
    reg_sub = reg.add_subparsers(dest="action", required=True)
    add = reg_sub.add_parser("add")
    add.add_argument("--registry")
    add.add_argument("--id", required=True)
    add.add_argument("--endpoint", required=True)
    add.add_argument("--input-class", required=True)
    add.add_argument("--output-class", required=True)
    add.add_argument("--predicate", action="append", help="repeatable")
    add.add_argument("--direction", default="Forward", type=str.capitalize, choices=["Forward", "Inverse"])
    add.add_argument("--provider")
    lst = reg_sub.add_parser("list")
    lst.add_argument("--registry")
    show = reg_sub.add_parser("show")
    show.add_argument("--registry")
    show.add_argument("id")
    reg.set_defaults(func=cmd_registry)

    cl = sub.add_parser("classify", parents=[resolve_flags], help="lift individuals into the ontology")
    cl.add_argument("individuals", help="file with one IRI per line ('-' for stdin)")
    cl.add_argument("--output", "-o")
    cl.set_defaults(func=cmd_classify)

    ins = sub.add_parser("instances", parents=[resolve_flags], help="list instances of a defined class")
    ins.add_argument("cls", metavar="CLASS")
    ins.set_defaults(func=cmd_instances)

    sm = sub.add_parser("serve-mocks", help="run the mock service network until interrupted")
    sm.add_argument("config", nargs="?", help="harness JSON (default: the packaged fixture)")
    sm.add_argument("--ephemeral", action="store_true", help="ignore configured ports and pick free ones")
    sm.add_argument("--registry-out", help="also write the registry JSON here")
    sm.set_defaults(func=cmd_serve_mocks)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RUNTIME_ERRORS as exc:
        print(f"share: error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, *USER_ERRORS) as exc:
        print(f"share: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
