import pytest
from hypothesis import given, strategies as st

from share.errors import QuerySyntaxError, UnsupportedFeature
from share.harness import ASSOCIATED_WITH_DISEASE, HAS_GO_TERM, HAS_SOLVED_3D_STRUCTURE
from share.rdf import IRI, RDF_TYPE, XSD, Literal, Variable
from share.sparql import DEFAULT_PREFIXES, Query, TriplePattern, expand_iri, make_query, parse_query, query_variables

from conftest import PARKINSON_QUERY, STRUCTURES_QUERY, GO_TRANSCRIPTION, OMIM_PARKINSON, PTF

TF = Variable("transcriptionFactor")


def test_parkinson_query():
    q = parse_query(PARKINSON_QUERY)
    assert q.select_vars == ("transcriptionFactor",)
    assert q.patterns == (
        TriplePattern(TF, IRI(HAS_GO_TERM), GO_TRANSCRIPTION),
        TriplePattern(TF, IRI(ASSOCIATED_WITH_DISEASE), OMIM_PARKINSON),
    )
    assert not q.distinct and q.limit is None


def test_structures_query():
    q = parse_query(STRUCTURES_QUERY)
    assert q.patterns == (
        TriplePattern(TF, IRI(RDF_TYPE), IRI(PTF)),
        TriplePattern(TF, IRI(HAS_SOLVED_3D_STRUCTURE), Variable("structure")),
    )


def test_empty_where_is_syntax_error():
    with pytest.raises(QuerySyntaxError) as info:
        parse_query("SELECT ?x WHERE { }")
    assert info.value.position == 16


def test_query_variables():
    assert query_variables(parse_query(PARKINSON_QUERY)) == {"transcriptionFactor"}
    assert query_variables(parse_query(STRUCTURES_QUERY)) == {"transcriptionFactor", "structure"}
    q = parse_query("SELECT DISTINCT ?x WHERE { ?x <http://a/p> <http://a/o> }")
    ground = Query((), (TriplePattern(IRI("http://a/s"), IRI("http://a/p"), IRI("http://a/o")),))
    assert query_variables(ground) == set()
    assert q.distinct


def test_a_is_rdf_type_and_prefix_override():
    q = parse_query("PREFIX rdf: <http://other/> SELECT ?x WHERE { ?x a rdf:C . ?x rdf:type rdf:D }")
    assert q.patterns[0].predicate == IRI(RDF_TYPE)
    assert q.patterns[0].object == IRI("http://other/C")
    assert q.patterns[1].predicate == IRI("http://other/type")


def test_duplicate_patterns_collapsed():
    q = parse_query("SELECT ?x WHERE { ?x <http://a/p> ?y . ?x <http://a/p> ?y . }")
    assert len(q.patterns) == 1


def test_limit_literals_and_shorthand():
    q = parse_query('SELECT ?x ?y WHERE { ?x <http://a/p> "v", 42 ; <http://a/q> ?y } LIMIT 5')
    assert q.limit == 5
    assert [p.object for p in q.patterns] == [Literal("v"), Literal("42", XSD + "integer"), Variable("y")]
    assert q.patterns[2].predicate == IRI("http://a/q")


def test_typed_literal_with_prefixed_datatype():
    q = parse_query('SELECT ?x WHERE { ?x <http://a/p> "7"^^xsd:int }')
    assert q.patterns[0].object == Literal("7", XSD + "int")


@pytest.mark.parametrize("text, feature", [
    ("SELECT ?x WHERE { ?x <http://a/p> ?y OPTIONAL { ?x <http://a/q> ?z } }", "OPTIONAL"),
    ("SELECT ?x WHERE { { ?x <http://a/p> ?y } UNION { ?x <http://a/q> ?y } }", "nested group pattern"),
    ("SELECT ?x WHERE { ?x <http://a/p> ?y FILTER(?y > 3) }", "FILTER"),
    ("CONSTRUCT { ?x <http://a/p> ?y } WHERE { ?x <http://a/p> ?y }", "CONSTRUCT"),
    ("ASK { ?x <http://a/p> ?y }", "ASK"),
    ("SELECT * WHERE { ?x <http://a/p> ?y }", "SELECT *"),
    ("SELECT ?x WHERE { ?x <http://a/p>/<http://a/q> ?y }", "property path"),
    ("SELECT ?x WHERE { SERVICE <http://s/> { ?x <http://a/p> ?y } }", "SERVICE"),
    ("SELECT ?x WHERE { ?x <http://a/p> ?y } ORDER BY ?x", "ORDER"),
    ('SELECT ?x WHERE { ?x <http://a/p> "chat"@fr }', "language tag"),
])
def test_unsupported_features(text, feature):
    with pytest.raises(UnsupportedFeature) as info:
        parse_query(text)
    assert info.value.name == feature


@pytest.mark.parametrize("text", [
    "",
    "SELECT",
    "SELECT ?x",
    "SELECT ?x WHERE { ?x <http://a/p> }",
    "SELECT ?x WHERE { ?x <http://a/p> ?y",
    "SELECT ?x WHERE { ?y <http://a/p> ?z }",
    "SELECT ?x WHERE { ?x undeclared:p ?z }",
    "SELECT ?x WHERE { ?x <http://a/p> ?z } LIMIT 0",
    "SELECT ?x WHERE { ?x <http://a/p> ?z } LIMIT ?x",
    'SELECT ?x WHERE { "lit" <http://a/p> ?x }',
    "SELECT ?x WHERE { ?x <http://a/p> ?z } trailing",
    "SELECT ?x WHERE { ?x <http://a/p> ?z ?w }",
    "SELECT ?x WHERE { ?x ~ ?z }",
])
def test_syntax_errors(text):
    with pytest.raises(QuerySyntaxError):
        parse_query(text)


def test_expand_iri_idempotent_on_absolute():
    prefixes = dict(DEFAULT_PREFIXES, GO="http://go/")
    once = expand_iri("GO:0006351", prefixes)
    assert once == "http://go/0006351"
    assert expand_iri(once, prefixes) == once
    assert expand_iri("<http://x/y>", prefixes) == "http://x/y"


@given(st.sampled_from(["http://a/b", "https://x.org/c#d", "urn:isbn:1", "http://go/0006351"]))
def test_expand_iri_identity_property(iri):
    assert expand_iri(iri, DEFAULT_PREFIXES) == iri


def test_make_query_and_round_trip_text():
    pats = [TriplePattern(Variable("x"), IRI("http://a/p"), IRI("http://a/o"))] * 2
    q = make_query(pats)
    assert q.select_vars == ("x",) and len(q.patterns) == 1
    assert parse_query(q.to_sparql()) == q


# grammar-driven fuzzing: sequences of subset tokens and stray fragments
TOKENS = [
    "PREFIX", "ex:", "<http://ex/>", "SELECT", "DISTINCT", "WHERE", "{", "}", ".", ";", ",", "?x", "?y",
    "ex:p", "<http://a/p>", "a", '"lit"', "42", "LIMIT", "3", "OPTIONAL", "FILTER", "(", ")", "*", "UNION",
    "^^", "xsd:int", "@en", "#c\n", "rdf:type", "_:b", "$z",
]


@given(st.lists(st.sampled_from(TOKENS), max_size=25))
def test_parse_is_total_over_token_soup(tokens):
    try:
        q = parse_query(" ".join(tokens))
    except (QuerySyntaxError, UnsupportedFeature):
        return
    assert isinstance(q, Query)
    assert set(q.select_vars) <= query_variables(q)


@given(st.text(max_size=60))
def test_parse_is_total_over_arbitrary_text(text):
    try:
        parse_query(text)
    except (QuerySyntaxError, UnsupportedFeature):
        pass


@given(
    st.lists(st.tuples(st.sampled_from(["?x", "?y", "<http://a/s>"]),
                       st.sampled_from(["<http://a/p>", "a", "?p"]),
                       st.sampled_from(["?x", "?y", "<http://a/o>", '"v"'])), min_size=1, max_size=4))
def test_generated_valid_queries_parse(triples):
    body = " . ".join(" ".join(t) for t in triples)
    names = sorted({tok[1:] for t in triples for tok in t if tok.startswith("?")})
    if not names:
        return
    q = parse_query(f"SELECT {' '.join('?' + n for n in names)} WHERE {{ {body} }}")
    assert set(q.select_vars) == set(names)
    assert len(q.patterns) == len(set(triples))
