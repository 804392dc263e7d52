"""In-process mock service network speaking the SHARE wire protocol.

Each mock serves one relation (a dataset of triples sharing one
predicate) from a loopback HTTP server. A Forward mock answers, for every
input typed in the request, the dataset triples having it as subject; an
Inverse mock answers the triples having it as object. Answers also type
each returned resource with the mock's output class.

Failures are injected on a deterministic schedule: every request, or every
n-th request when ``failure_every_n`` is set.
"""

from __future__ import annotations

import enum
import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources

from share.errors import BindError, FormatError, NTriplesError
from share.rdf import IRI, RDF_TYPE, Graph, Triple, load_ntriples, parse_ntriples, serialize_ntriples
from share.registry import Direction, Registry, ServiceDescriptor

NTRIPLES = "application/n-triples"

# fixture vocabulary
EX = "http://ex/"
SHARE = "http://share/"
GO = "http://go/"
OMIM = "http://omim/"
PDB = "http://pdb/"
SERVICES = SHARE + "services/"

HAS_GO_TERM = SHARE + "hasGOTerm"
ASSOCIATED_WITH_DISEASE = SHARE + "associatedWithDisease"
HAS_SOLVED_3D_STRUCTURE = SHARE + "hasSolved3DStructure"

PROTEIN = SHARE + "Protein"
GO_TERM = SHARE + "GOTerm"
OMIM_RECORD = SHARE + "OMIMRecord"
STRUCTURE = SHARE + "Structure"

GO_SERVICE = SERVICES + "getGOTermsByProtein"
OMIM_SERVICE = SERVICES + "MOBYSHoundGiFromOMIM"
STRUCTURE_SERVICE = SERVICES + "getSolvedStructuresByProtein"
GO_INVERSE_SERVICE = SERVICES + "getProteinsByGOTerm"


class FailureMode(str, enum.Enum):
    NONE = "None"
    HTTP_STATUS = "HttpStatus"
    TIMEOUT = "Timeout"
    GARBAGE = "GarbagePayload"


@dataclass
class MockServiceConfig:
    id: str
    predicate: str
    direction: Direction
    dataset: Graph
    input_class: str
    output_class: str
    port: int = 0
    path: str = "/"
    latency: float = 0.0
    failure: FailureMode = FailureMode.NONE
    failure_status: int = 500
    failure_every_n: int | None = None
    # how long a Timeout failure stalls before answering
    hang: float = 30.0

    def __post_init__(self):
        if not isinstance(self.direction, Direction):
            self.direction = Direction.parse(self.direction)
        if not isinstance(self.failure, FailureMode):
            self.failure = FailureMode(self.failure)
        wrong = [t for t in self.dataset if t.predicate.value != self.predicate]
        if wrong:
            raise ValueError(f"mock <{self.id}>: dataset triple {wrong[0].n3()} does not use <{self.predicate}>")

    def should_fail(self, request_number: int) -> bool:
        if self.failure is FailureMode.NONE:
            return False
        if self.failure_every_n:
            return request_number % self.failure_every_n == 0
        return True

    def answer(self, inputs: set[IRI]) -> Graph:
        out = Graph()
        rdf_type = IRI(RDF_TYPE)
        out_cls = IRI(self.output_class)
        for term in sorted(inputs):
            if self.direction is Direction.FORWARD:
                found = self.dataset.match(term, None, None)
                others = [t.object for t in found]
            else:
                found = self.dataset.match(None, None, term)
                others = [t.subject for t in found]
            out.add_all(found)
            out.add_all(Triple(o, rdf_type, out_cls) for o in others if isinstance(o, IRI))
        return out


class MockService:
    """Handle on a running mock: endpoint URL, request counter, shutdown."""

    def __init__(self, cfg: MockServiceConfig):
        self.cfg = cfg
        self._count = 0
        self._count_lock = threading.Lock()
        self._stopping = threading.Event()
        handler = _make_handler(self)
        try:
            self.server = ThreadingHTTPServer(("127.0.0.1", cfg.port), handler)
        except OSError as exc:
            raise BindError(f"cannot bind mock <{cfg.id}> to port {cfg.port}: {exc.strerror or exc}") from None
        self.server.daemon_threads = True
        self.thread = threading.Thread(target=self.server.serve_forever, args=(0.05,), name=f"mock:{cfg.id}", daemon=True)
        self.thread.start()

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}{self.cfg.path}"

    @property
    def requests(self) -> int:
        with self._count_lock:
            return self._count

    def _next_request(self) -> int:
        with self._count_lock:
            self._count += 1
            return self._count

    def descriptor(self) -> ServiceDescriptor:
        return ServiceDescriptor(
            id=self.cfg.id, endpoint=self.url, input_class=self.cfg.input_class,
            output_class=self.cfg.output_class, predicates=frozenset({self.cfg.predicate}),
            direction=self.cfg.direction, provider="share mock harness")

    def shutdown(self) -> None:
        self._stopping.set()
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def _make_handler(service: MockService):
    cfg = service.cfg

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, format, *args):
            pass

        def _send(self, status: int, body: bytes, content_type: str = NTRIPLES):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            self._send(405, b"POST N-Triples to this endpoint\n", "text/plain")

        def do_POST(self):
            n = service._next_request()
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            if cfg.latency:
                time.sleep(cfg.latency)
            if cfg.should_fail(n):
                if cfg.failure is FailureMode.HTTP_STATUS:
                    return self._send(cfg.failure_status, b"injected failure\n", "text/plain")
                if cfg.failure is FailureMode.GARBAGE:
                    return self._send(200, b"this is <not n-triples\n")
                if cfg.failure is FailureMode.TIMEOUT:
                    service._stopping.wait(cfg.hang)
                    return self._send(503, b"stalled\n", "text/plain")
            if not body.strip():
                return self._send(400, b"empty request body\n", "text/plain")
            try:
                request = parse_ntriples(body)
            except NTriplesError as exc:
                return self._send(400, f"bad N-Triples: {exc}\n".encode(), "text/plain")
            inputs = {t.subject for t in request.match(None, IRI(RDF_TYPE), None)}
            if not inputs:
                return self._send(400, b"request types no inputs\n", "text/plain")
            self._send(200, serialize_ntriples(cfg.answer(inputs)).encode("utf-8"))

    return Handler


def serve(cfg: MockServiceConfig) -> MockService:
    """Start one mock on loopback (port 0 picks a free port)."""
    return MockService(cfg)


def spawn(configs: list[MockServiceConfig], class_hierarchy=()) -> tuple[Registry, list[MockService]]:
    handles: list[MockService] = []
    try:
        for cfg in configs:
            handles.append(serve(cfg))
    except BindError:
        shutdown_all(handles)
        raise
    registry = Registry(class_hierarchy=set(class_hierarchy))
    for h in handles:
        registry.register(h.descriptor())
    return registry, handles


def shutdown_all(handles) -> None:
    for h in handles:
        h.shutdown()


# -- canonical fixture -----------------------------------------------------------

def fixture_path(name: str):
    return resources.files("share") / "fixtures" / name


def fixture_dataset() -> Graph:
    """The nine-triple virtual graph behind the fixture network."""
    return load_ntriples(fixture_path("proteins.nt"), source=None)


def _relation(g: Graph, predicate: str) -> Graph:
    return Graph(g.match(None, IRI(predicate), None))


FIXTURE_CLASS_HIERARCHY: set[tuple[str, str]] = set()


def fixture_configs(ports: dict[str, int] | None = None) -> list[MockServiceConfig]:
    data = fixture_dataset()
    ports = ports or {}
    return [
        MockServiceConfig(GO_SERVICE, HAS_GO_TERM, Direction.FORWARD, _relation(data, HAS_GO_TERM),
                          PROTEIN, GO_TERM, port=ports.get(GO_SERVICE, 0)),
        MockServiceConfig(OMIM_SERVICE, ASSOCIATED_WITH_DISEASE, Direction.INVERSE,
                          _relation(data, ASSOCIATED_WITH_DISEASE), OMIM_RECORD, PROTEIN,
                          port=ports.get(OMIM_SERVICE, 0)),
        MockServiceConfig(STRUCTURE_SERVICE, HAS_SOLVED_3D_STRUCTURE, Direction.FORWARD,
                          _relation(data, HAS_SOLVED_3D_STRUCTURE), PROTEIN, STRUCTURE,
                          port=ports.get(STRUCTURE_SERVICE, 0)),
    ]


def spawn_fixture_network(overrides: dict[str, dict] | None = None) -> tuple[Registry, list[MockService]]:
    """Start the three fixture services; ``overrides`` patches configs by service id."""
    configs = fixture_configs()
    if overrides:
        configs = [replace(c, **overrides.get(c.id, {})) for c in configs]
    return spawn(configs, FIXTURE_CLASS_HIERARCHY)


# -- harness config files ----------------------------------------------------------

_CONFIG_FIELDS = {"id", "predicate", "direction", "input_class", "output_class", "port", "path",
                  "latency", "failure", "failure_status", "failure_every_n", "hang", "dataset", "triples"}


@dataclass
class HarnessConfig:
    services: list[MockServiceConfig] = field(default_factory=list)
    class_hierarchy: set[tuple[str, str]] = field(default_factory=set)


def load_harness_config(path: str | os.PathLike) -> HarnessConfig:
    """Read a JSON harness description.

    Each service gives its relation either inline (``"triples"``: N-Triples
    text) or as ``"dataset"``: a path relative to the config file, which is
    filtered down to the service's predicate.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{exc.lineno}", exc.msg) from None
    if not isinstance(data, dict) or "services" not in data:
        raise FormatError(str(path), "expected an object with a 'services' array")
    configs = []
    for i, entry in enumerate(data["services"]):
        loc = f"{path}: services[{i}]"
        extra = set(entry) - _CONFIG_FIELDS
        if extra:
            raise FormatError(loc, f"unknown field {sorted(extra)[0]!r}")
        for key in ("id", "predicate", "direction", "input_class", "output_class"):
            if key not in entry:
                raise FormatError(loc, f"missing field {key!r}")
        try:
            if "triples" in entry:
                g = parse_ntriples(entry["triples"])
            elif "dataset" in entry:
                g = load_ntriples(os.path.join(base, entry["dataset"]), source=None)
            else:
                raise FormatError(loc, "needs 'triples' or 'dataset'")
            kwargs = {k: v for k, v in entry.items() if k not in ("triples", "dataset")}
            configs.append(MockServiceConfig(dataset=_relation(g, entry["predicate"]), **kwargs))
        except (NTriplesError, ValueError, OSError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(loc, str(exc)) from None
    hierarchy = {tuple(p) for p in data.get("class_hierarchy", [])}
    return HarnessConfig(configs, hierarchy)
