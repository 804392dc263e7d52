"""Parser for the SPARQL subset SHARE answers.

Grammar::

    query    := prefix* 'SELECT' 'DISTINCT'? var+ 'WHERE'? '{' triples '}' ('LIMIT' int)?
    prefix   := 'PREFIX' pname_ns iri
    triples  := subject predicate object ((';' predicate object) | (',' object))* '.'? ...

Everything else that is legal SPARQL (OPTIONAL, UNION, FILTER, CONSTRUCT,
property paths, ...) raises :class:`UnsupportedFeature`, while text that is
not SPARQL at all raises :class:`QuerySyntaxError`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from share.errors import QuerySyntaxError, UnsupportedFeature
from share.rdf import IRI, OWL, RDF, RDF_TYPE, RDFS, XSD, Literal, Term, Triple, Variable

DEFAULT_PREFIXES = {"rdf": RDF, "rdfs": RDFS, "xsd": XSD, "owl": OWL}

UNSUPPORTED_KEYWORDS = {
    "OPTIONAL", "UNION", "FILTER", "CONSTRUCT", "ASK", "DESCRIBE", "GRAPH",
    "SERVICE", "BIND", "VALUES", "MINUS", "ORDER", "GROUP", "HAVING", "OFFSET",
    "BASE", "FROM", "NAMED", "INSERT", "DELETE", "LOAD", "CLEAR", "DROP",
    "CREATE", "REDUCED", "EXISTS", "NOT", "AS", "WITH", "USING",
}


@dataclass(frozen=True)
class TriplePattern:
    subject: Term
    predicate: Term
    object: Term

    def variables(self) -> set[str]:
        return {t.name for t in self if isinstance(t, Variable)}

    def substitute(self, binding: Mapping[str, Term]) -> "TriplePattern":
        def sub(t: Term) -> Term:
            if isinstance(t, Variable):
                return binding.get(t.name, t)
            return t
        return TriplePattern(sub(self.subject), sub(self.predicate), sub(self.object))

    def is_ground(self) -> bool:
        return not self.variables()

    def to_triple(self) -> Triple:
        return Triple(self.subject, self.predicate, self.object)

    def n3(self) -> str:
        pred = "a" if self.predicate == IRI(RDF_TYPE) else self.predicate.n3()
        return f"{self.subject.n3()} {pred} {self.object.n3()}"

    def __iter__(self):
        yield self.subject
        yield self.predicate
        yield self.object

    def __str__(self) -> str:
        return self.n3()


@dataclass(frozen=True)
class Query:
    select_vars: tuple[str, ...]
    patterns: tuple[TriplePattern, ...]
    distinct: bool = False
    limit: int | None = None
    prefixes: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.patterns:
            raise ValueError("a query needs at least one triple pattern")
        seen = query_variables(self)
        missing = [v for v in self.select_vars if v not in seen]
        if missing:
            raise ValueError(f"selected variable ?{missing[0]} does not occur in any pattern")
        if self.limit is not None and self.limit < 1:
            raise ValueError("LIMIT must be a positive integer")

    def to_sparql(self) -> str:
        head = "SELECT " + ("DISTINCT " if self.distinct else "")
        head += " ".join("?" + v for v in self.select_vars)
        body = "".join(f"  {p.n3()} .\n" for p in self.patterns)
        tail = f"\nLIMIT {self.limit}" if self.limit else ""
        return f"{head}\nWHERE {{\n{body}}}{tail}\n"


def query_variables(q: Query) -> set[str]:
    found: set[str] = set()
    for p in q.patterns:
        found |= p.variables()
    return found


def make_query(patterns: Iterable[TriplePattern], select: Iterable[str] | None = None,
               distinct: bool = False, limit: int | None = None) -> Query:
    """Build a Query directly, collapsing duplicate patterns.

    ``select`` defaults to every variable in order of first appearance.
    """
    unique = tuple(dict.fromkeys(patterns))
    if select is None:
        select = []
        for p in unique:
            for t in p:
                if isinstance(t, Variable) and t.name not in select:
                    select.append(t.name)
    return Query(tuple(select), unique, distinct, limit)


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\s]*>)
  | (?P<var>[?$][A-Za-z0-9_]+)
  | (?P<string>"(?:[^"\\\n\r]|\\.)*"|'(?:[^'\\\n\r]|\\.)*')
  | (?P<pname>(?:[A-Za-z][A-Za-z0-9_\-.]*)?:(?:[A-Za-z0-9_\-:%](?:[A-Za-z0-9_\-.:%]*[A-Za-z0-9_\-:%])?)?)
  | (?P<number>[+-]?\d+(?:\.\d+)?)
  | (?P<word>[A-Za-z]+)
  | (?P<dtsep>\^\^)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<punct>[{}.;,*()\[\]|/^!=<>+])
""", re.VERBOSE)

_STRING_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise QuerySyntaxError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


def _unquote(raw: str, pos: int) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1]
            if nxt in _STRING_ESCAPES:
                out.append(_STRING_ESCAPES[nxt])
                i += 2
                continue
            if nxt in "uU":
                width = 4 if nxt == "u" else 8
                digits = body[i + 2:i + 2 + width]
                try:
                    out.append(chr(int(digits, 16)))
                except ValueError:
                    raise QuerySyntaxError(pos + i + 1, "bad unicode escape") from None
                if len(digits) != width:
                    raise QuerySyntaxError(pos + i + 1, "bad unicode escape")
                i += 2 + width
                continue
            raise QuerySyntaxError(pos + i + 1, f"bad escape \\{nxt}")
        out.append(ch)
        i += 1
    return "".join(out)


def expand_iri(text: str, prefixes: Mapping[str, str]) -> str:
    """Expand ``<iri>`` or ``prefix:local`` into an absolute IRI string.

    Text that is already an absolute IRI (``scheme://...`` or ``urn:...``)
    and has no declared prefix is returned unchanged.
    """
    if text.startswith("<") and text.endswith(">"):
        return text[1:-1]
    prefix, sep, local = text.partition(":")
    if not sep:
        raise KeyError(text)
    if prefix in prefixes:
        return prefixes[prefix] + local
    if local.startswith("//") or prefix in ("urn", "mailto", "tag"):
        return text
    raise KeyError(prefix)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes = dict(DEFAULT_PREFIXES)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, reason: str, tok: _Token | None = None):
        tok = tok or self.tok
        raise QuerySyntaxError(tok.pos, reason)

    def keyword(self, tok: _Token | None = None) -> str | None:
        tok = tok or self.tok
        return tok.text.upper() if tok.kind == "word" else None

    def check_unsupported(self, tok: _Token | None = None):
        tok = tok or self.tok
        kw = self.keyword(tok)
        if kw in UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeature(kw, tok.pos)

    def expect_punct(self, ch: str):
        if self.tok.kind == "punct" and self.tok.text == ch:
            return self.advance()
        self.error(f"expected {ch!r}, found {self.tok.text or 'end of query'!r}")

    def parse(self) -> Query:
        while self.keyword() == "PREFIX":
            self.advance()
            name = self.advance()
            if name.kind != "pname" or not name.text.endswith(":") or name.text.count(":") != 1:
                self.error("expected a prefix name ending in ':'", name)
            iri = self.advance()
            if iri.kind != "iri":
                self.error("expected <IRI> after prefix name", iri)
            self.prefixes[name.text[:-1]] = iri.text[1:-1]
        self.check_unsupported()
        if self.keyword() != "SELECT":
            self.error(f"expected SELECT, found {self.tok.text or 'end of query'!r}")
        self.advance()
        distinct = False
        if self.keyword() == "DISTINCT":
            distinct = True
            self.advance()
        self.check_unsupported()
        select: list[str] = []
        while self.tok.kind == "var":
            name = self.advance().text[1:]
            if name not in select:
                select.append(name)
        if not select:
            if self.tok.kind == "punct" and self.tok.text == "*":
                raise UnsupportedFeature("SELECT *", self.tok.pos)
            if self.tok.kind == "punct" and self.tok.text == "(":
                raise UnsupportedFeature("projection expression", self.tok.pos)
            self.error("SELECT needs at least one variable")
        self.check_unsupported()
        if self.keyword() == "WHERE":
            self.advance()
        brace = self.tok
        self.expect_punct("{")
        patterns = self.group()
        if not patterns:
            self.error("empty pattern block", brace)
        limit = None
        self.check_unsupported()
        if self.keyword() == "LIMIT":
            self.advance()
            num = self.advance()
            if num.kind != "number" or not num.text.isdigit():
                self.error("LIMIT needs a positive integer", num)
            limit = int(num.text)
            if limit < 1:
                self.error("LIMIT needs a positive integer", num)
            self.check_unsupported()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r} after query")
        unique = tuple(dict.fromkeys(patterns))
        seen = set().union(*(p.variables() for p in unique))
        for name in select:
            if name not in seen:
                self.error(f"selected variable ?{name} does not occur in WHERE")
        return Query(tuple(select), unique, distinct, limit, dict(self.prefixes))

    def group(self) -> list[TriplePattern]:
        patterns: list[TriplePattern] = []
        while True:
            tok = self.tok
            if tok.kind == "punct" and tok.text == "}":
                self.advance()
                return patterns
            if tok.kind == "eof":
                self.error("missing '}'")
            self.check_unsupported()
            if tok.kind == "punct" and tok.text == "{":
                raise UnsupportedFeature("nested group pattern", tok.pos)
            subject = self.term("subject")
            self.predicate_object_list(subject, patterns)
            if self.tok.kind == "punct" and self.tok.text == ".":
                self.advance()
            elif not (self.tok.kind == "punct" and self.tok.text == "}"):
                self.check_unsupported()
                self.error(f"expected '.' or '}}', found {self.tok.text or 'end of query'!r}")

    def predicate_object_list(self, subject: Term, out: list[TriplePattern]):
        while True:
            predicate = self.term("predicate")
            while True:
                obj = self.term("object")
                out.append(TriplePattern(subject, predicate, obj))
                if self.tok.kind == "punct" and self.tok.text == ",":
                    self.advance()
                    continue
                break
            if self.tok.kind == "punct" and self.tok.text == ";":
                self.advance()
                while self.tok.kind == "punct" and self.tok.text == ";":
                    self.advance()
                if self.tok.kind == "punct" and self.tok.text in ".}":
                    return
                continue
            return

    def term(self, position: str) -> Term:
        tok = self.tok
        if tok.kind == "var":
            self.advance()
            return Variable(tok.text[1:])
        if tok.kind in ("iri", "pname"):
            self.advance()
            return self.iri_term(tok)
        if tok.kind == "word" and tok.text == "a" and position == "predicate":
            self.advance()
            return IRI(RDF_TYPE)
        if tok.kind in ("string", "number") or (tok.kind == "word" and tok.text in ("true", "false")):
            if position != "object":
                self.error(f"literal not allowed as {position}", tok)
            return self.literal()
        if tok.kind == "punct" and tok.text in "[(":
            raise UnsupportedFeature("blank node syntax" if tok.text == "[" else "collection", tok.pos)
        if tok.kind == "punct" and tok.text in "^|/!*+":
            raise UnsupportedFeature("property path", tok.pos)
        self.check_unsupported(tok)
        self.error(f"expected {position}, found {tok.text or 'end of query'!r}", tok)

    def iri_term(self, tok: _Token) -> IRI:
        try:
            value = expand_iri(tok.text, self.prefixes)
        except KeyError:
            self.error(f"undeclared prefix in {tok.text!r}", tok)
        try:
            return IRI(value)
        except ValueError:
            self.error(f"invalid IRI {value!r}", tok)

    def literal(self) -> Literal:
        tok = self.advance()
        if tok.kind == "number":
            dt = "decimal" if "." in tok.text else "integer"
            return Literal(tok.text, XSD + dt)
        if tok.kind == "word":
            return Literal(tok.text, XSD + "boolean")
        value = _unquote(tok.text, tok.pos)
        if self.tok.kind == "lang":
            raise UnsupportedFeature("language tag", self.tok.pos)
        if self.tok.kind == "dtsep":
            self.advance()
            dt_tok = self.advance()
            if dt_tok.kind not in ("iri", "pname"):
                self.error("expected datatype IRI after '^^'", dt_tok)
            return Literal(value, self.iri_term(dt_tok).value)
        return Literal(value)


def parse_query(text: str) -> Query:
    """Parse query text into a :class:`Query` with all prefixes expanded."""
    return _Parser(text).parse()
