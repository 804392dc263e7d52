"""RDF terms, triples, an indexed in-memory triple store and N-Triples I/O.

N-Triples is the only document format used by SHARE: service requests,
service responses, fixtures and seed stores are all one statement per line.
Blank nodes and language-tagged literals are rejected, so every individual
is IRI-identified and triples from different services merge by identity.
"""

from __future__ import annotations

import re
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator

from share.errors import NTriplesError

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
XSD = "http://www.w3.org/2001/XMLSchema#"
OWL = "http://www.w3.org/2002/07/owl#"
RDF_TYPE = RDF + "type"

LOCAL = "local"

_IRI_FORBIDDEN = re.compile(r'[\s<>"{}|^`\\]')
_VAR_NAME = re.compile(r"^[A-Za-z0-9_·À-￿]+$")


class Term:
    """Common base of IRI, Literal and Variable.

    Terms order by their N-Triples text so that every listing produced by
    the store or the engine is deterministic.
    """

    __slots__ = ()
    kind: str

    def n3(self) -> str:
        raise NotImplementedError

    def __lt__(self, other: "Term") -> bool:
        if not isinstance(other, Term):
            return NotImplemented
        return self.n3() < other.n3()

    def __str__(self) -> str:
        return self.n3()


@dataclass(frozen=True, slots=True)
class IRI(Term):
    value: str

    def __post_init__(self):
        if not self.value or _IRI_FORBIDDEN.search(self.value):
            raise ValueError(f"invalid IRI {self.value!r}")

    @property
    def kind(self) -> str:
        return "IRI"

    def n3(self) -> str:
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class Literal(Term):
    value: str
    datatype: str | None = None

    def __post_init__(self):
        if self.datatype is not None and (not self.datatype or _IRI_FORBIDDEN.search(self.datatype)):
            raise ValueError(f"invalid datatype IRI {self.datatype!r}")

    @property
    def kind(self) -> str:
        return "Literal"

    def n3(self) -> str:
        text = '"' + _escape(self.value) + '"'
        if self.datatype:
            text += f"^^<{self.datatype}>"
        return text


@dataclass(frozen=True, slots=True)
class Variable(Term):
    name: str

    def __post_init__(self):
        if not _VAR_NAME.match(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")

    @property
    def kind(self) -> str:
        return "Variable"

    @property
    def value(self) -> str:
        return self.name

    def n3(self) -> str:
        return "?" + self.name


@dataclass(frozen=True, slots=True)
class Triple:
    subject: IRI
    predicate: IRI
    object: IRI | Literal

    def __post_init__(self):
        if not isinstance(self.subject, IRI):
            raise TypeError(f"triple subject must be an IRI, got {self.subject!r}")
        if not isinstance(self.predicate, IRI):
            raise TypeError(f"triple predicate must be an IRI, got {self.predicate!r}")
        if not isinstance(self.object, (IRI, Literal)):
            raise TypeError(f"triple object must be an IRI or Literal, got {self.object!r}")

    def sort_key(self) -> tuple[str, str, str]:
        return (self.subject.n3(), self.predicate.n3(), self.object.n3())

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."

    def __lt__(self, other: "Triple") -> bool:
        return self.sort_key() < other.sort_key()

    def __iter__(self):
        yield self.subject
        yield self.predicate
        yield self.object


def triple(s: str, p: str, o: str | Term) -> Triple:
    """Shorthand: build a triple from IRI strings (object may be any Term)."""
    obj = o if isinstance(o, Term) else IRI(o)
    return Triple(IRI(s), IRI(p), obj)


class Graph:
    """Mutable set of triples with SPO, POS and OSP indexes.

    All access goes through one re-entrant lock, so a batch inserted with
    :meth:`add_all` is never observed half-way by a concurrent reader.
    """

    def __init__(self, triples: Iterable[Triple] = (), source: str | None = None):
        self._lock = threading.RLock()
        self._triples: set[Triple] = set()
        self._spo: dict = defaultdict(lambda: defaultdict(set))
        self._pos: dict = defaultdict(lambda: defaultdict(set))
        self._osp: dict = defaultdict(lambda: defaultdict(set))
        self.provenance: dict[Triple, str] = {}
        self.add_all(triples, source=source)

    def _insert(self, t: Triple, source: str | None) -> bool:
        if t in self._triples:
            return False
        self._triples.add(t)
        s, p, o = t.subject, t.predicate, t.object
        self._spo[s][p].add(o)
        self._pos[p][o].add(s)
        self._osp[o][s].add(p)
        if source is not None:
            self.provenance[t] = source
        return True

    def add(self, t: Triple, source: str | None = None) -> bool:
        """Insert one triple; returns False if it was already present."""
        with self._lock:
            return self._insert(t, source)

    def add_all(self, triples: Iterable[Triple], source: str | None = None) -> int:
        """Insert a batch atomically; returns the number of new triples."""
        with self._lock:
            return sum(self._insert(t, source) for t in triples)

    def update(self, other: "Graph", source: str | None = None) -> int:
        with other._lock:
            items = [(t, other.provenance.get(t)) for t in other._triples]
        with self._lock:
            return sum(self._insert(t, source or src) for t, src in items)

    def match(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> list[Triple]:
        """Triples agreeing with every given position, in (s, p, o) text order.

        ``None`` and :class:`Variable` both mean "unbound".
        """
        s = None if isinstance(s, Variable) else s
        p = None if isinstance(p, Variable) else p
        o = None if isinstance(o, Variable) else o
        with self._lock:
            found = list(self._scan(s, p, o))
        found.sort(key=Triple.sort_key)
        return found

    def _scan(self, s, p, o) -> Iterator[Triple]:
        if s is not None:
            by_p = self._spo.get(s)
            if not by_p:
                return
            preds = [p] if p is not None else list(by_p)
            for pp in preds:
                objs = by_p.get(pp, ())
                if o is not None:
                    if o in objs:
                        yield Triple(s, pp, o)
                else:
                    for oo in objs:
                        yield Triple(s, pp, oo)
        elif p is not None:
            by_o = self._pos.get(p)
            if not by_o:
                return
            objs = [o] if o is not None else list(by_o)
            for oo in objs:
                for ss in by_o.get(oo, ()):
                    yield Triple(ss, p, oo)
        elif o is not None:
            for ss, preds in self._osp.get(o, {}).items():
                for pp in preds:
                    yield Triple(ss, pp, o)
        else:
            yield from self._triples

    def count(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> int:
        with self._lock:
            if s is None and o is None and p is not None and not isinstance(p, Variable):
                return sum(len(v) for v in self._pos.get(p, {}).values())
        return len(self.match(s, p, o))

    def has_predicate(self, p: IRI) -> bool:
        with self._lock:
            return bool(self._pos.get(p))

    def instances_of(self, classes: Iterable[str]) -> set[IRI]:
        """Subjects typed (``rdf:type``) with any of the given class IRIs."""
        found: set[IRI] = set()
        rdf_type = IRI(RDF_TYPE)
        with self._lock:
            by_o = self._pos.get(rdf_type, {})
            for c in classes:
                found.update(s for s in by_o.get(IRI(c), ()) if isinstance(s, IRI))
        return found

    def triples(self) -> list[Triple]:
        return self.match()

    def copy(self) -> "Graph":
        g = Graph()
        g.update(self)
        return g

    def __contains__(self, t: object) -> bool:
        with self._lock:
            return t in self._triples

    def __len__(self) -> int:
        with self._lock:
            return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        with self._lock:
            mine = set(self._triples)
        with other._lock:
            return mine == other._triples

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"<Graph of {len(self)} triples>"


# -- N-Triples ---------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f", "'": "'"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


class _LineScanner:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.pos = 0
        self.lineno = lineno

    def fail(self, reason: str):
        raise NTriplesError(self.lineno, f"{reason} (column {self.pos + 1})")

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def iri(self) -> IRI:
        if self.peek() != "<":
            self.fail("expected '<'")
        end = self.text.find(">", self.pos + 1)
        if end < 0:
            self.fail("unterminated IRI")
        raw = self.text[self.pos + 1:end]
        value = _unescape_uchars(raw, self)
        try:
            term = IRI(value)
        except ValueError:
            self.fail(f"invalid IRI <{raw}>")
        self.pos = end + 1
        return term

    def literal(self) -> Literal:
        self.pos += 1  # opening quote
        out = []
        text = self.text
        while True:
            if self.pos >= len(text):
                self.fail("unterminated string literal")
            ch = text[self.pos]
            if ch == '"':
                self.pos += 1
                break
            if ch == "\\":
                nxt = text[self.pos + 1:self.pos + 2]
                if nxt in _UNESCAPES:
                    out.append(_UNESCAPES[nxt])
                    self.pos += 2
                elif nxt in ("u", "U"):
                    width = 4 if nxt == "u" else 8
                    digits = text[self.pos + 2:self.pos + 2 + width]
                    if len(digits) != width or not all(c in "0123456789abcdefABCDEF" for c in digits):
                        self.fail("bad unicode escape")
                    out.append(chr(int(digits, 16)))
                    self.pos += 2 + width
                else:
                    self.fail("bad escape sequence")
                continue
            out.append(ch)
            self.pos += 1
        datatype = None
        if text.startswith("^^", self.pos):
            self.pos += 2
            datatype = self.iri().value
        elif self.peek() == "@":
            self.fail("language-tagged literals are not supported")
        return Literal("".join(out), datatype)

    def term(self, position: str) -> Term:
        ch = self.peek()
        if ch == "<":
            return self.iri()
        if ch == '"':
            if position != "object":
                self.fail(f"literal not allowed as {position}")
            return self.literal()
        if self.text.startswith("_:", self.pos):
            self.fail("blank nodes are not supported")
        self.fail(f"expected {position}")


def _unescape_uchars(raw: str, scanner: _LineScanner) -> str:
    if "\\" not in raw:
        return raw

    def repl(m: re.Match) -> str:
        return chr(int(m.group(1) or m.group(2), 16))

    value = re.sub(r"\\u([0-9A-Fa-f]{4})|\\U([0-9A-Fa-f]{8})", repl, raw)
    if "\\" in value:
        scanner.fail("bad escape in IRI")
    return value


def parse_line(line: str, lineno: int = 1) -> Triple | None:
    """Parse one N-Triples line; ``None`` for blank and comment lines."""
    sc = _LineScanner(line.rstrip("\r\n"), lineno)
    sc.skip_ws()
    if sc.peek() in ("", "#"):
        return None
    s = sc.term("subject")
    sc.skip_ws()
    p = sc.term("predicate")
    sc.skip_ws()
    o = sc.term("object")
    sc.skip_ws()
    if sc.peek() != ".":
        sc.fail("expected '.' terminating the statement")
    sc.pos += 1
    sc.skip_ws()
    if sc.peek() not in ("", "#"):
        sc.fail("unexpected text after '.'")
    return Triple(s, p, o)


def parse_ntriples(text: str | bytes, source: str | None = None) -> Graph:
    """Parse an N-Triples document into a new :class:`Graph`.

    Raises :class:`~share.errors.NTriplesError` carrying the 1-based line
    number of the first malformed statement; nothing is returned on error.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NTriplesError(1, f"document is not UTF-8: {exc}") from None
    parsed = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        t = parse_line(line, lineno)
        if t is not None:
            parsed.append(t)
    return Graph(parsed, source=source)


def serialize_ntriples(g: Graph | Iterable[Triple]) -> str:
    """One statement per line, sorted by (s, p, o) text; ``""`` when empty."""
    triples = g.triples() if isinstance(g, Graph) else sorted(g, key=Triple.sort_key)
    return "".join(t.n3() + "\n" for t in triples)


def load_ntriples(path, source: str | None = LOCAL) -> Graph:
    with open(path, "rb") as fh:
        return parse_ntriples(fh.read(), source=source)


def match(g: Graph, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> list[Triple]:
    return g.match(s, p, o)
