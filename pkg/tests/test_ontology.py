import json

import pytest
from hypothesis import given, strategies as st

from share.errors import CyclicDefinition, FormatError, OntologyError, UndefinedClass, UnsupportedConstruct
from share.harness import ASSOCIATED_WITH_DISEASE, HAS_GO_TERM, SHARE
from share.ontology import ClassDefinition, Ontology, expand_class, load_ontology, rewrite_patterns, save_ontology
from share.rdf import IRI, RDF_TYPE, Literal, Variable
from share.sparql import TriplePattern, parse_query

from conftest import PARKINSON_QUERY, GO_TRANSCRIPTION, OMIM_PARKINSON, PTF

X = Variable("x")


def test_flat_expansion_equals_parkinson_patterns(flat_ontology):
    q = parse_query(PARKINSON_QUERY.replace("?transcriptionFactor", "?x"))
    assert expand_class(flat_ontology, PTF, "x") == list(q.patterns)


def test_intersection_expansion_same_patterns(flat_ontology, intersection_ontology):
    flat = expand_class(flat_ontology, PTF, "x")
    nested = expand_class(intersection_ontology, PTF, "x")
    assert set(nested) == set(flat)
    assert nested == [
        TriplePattern(X, IRI(ASSOCIATED_WITH_DISEASE), OMIM_PARKINSON),
        TriplePattern(X, IRI(HAS_GO_TERM), GO_TRANSCRIPTION),
    ]


def test_single_primitive_intersection():
    onto = Ontology({"http://c/D": ClassDefinition("http://c/D", ("http://c/P",))}, frozenset({"http://c/P"}))
    assert expand_class(onto, "http://c/D", "x") == [TriplePattern(X, IRI(RDF_TYPE), IRI("http://c/P"))]


def test_expansion_with_constant_subject(flat_ontology):
    subs = expand_class(flat_ontology, PTF, IRI("http://ex/P1"))
    assert all(p.is_ground() for p in subs)


def test_undefined_class(flat_ontology):
    with pytest.raises(UndefinedClass):
        expand_class(flat_ontology, SHARE + "Nope", "x")


def test_cyclic_definition_rejected():
    a = ClassDefinition("http://c/A", ("http://c/B",))
    b = ClassDefinition("http://c/B", ("http://c/A",))
    with pytest.raises(CyclicDefinition) as info:
        Ontology({"http://c/A": a, "http://c/B": b})
    assert info.value.path[0] == info.value.path[-1]


def test_empty_definition_rejected():
    with pytest.raises(OntologyError):
        ClassDefinition("http://c/A")


def test_undeclared_member_rejected():
    with pytest.raises(OntologyError):
        Ontology({"http://c/A": ClassDefinition("http://c/A", ("http://c/Unknown",))})


def test_topological_order(intersection_ontology):
    order = intersection_ontology.topological_order()
    assert order.index(PTF) > order.index(SHARE + "TranscriptionFactor")
    assert order.index(PTF) > order.index(SHARE + "ParkinsonAssociatedProtein")


@pytest.mark.parametrize("key", ["some_values_from", "allValuesFrom", "cardinality", "union_of"])
def test_unsupported_constructs(tmp_path, key):
    path = tmp_path / "o.json"
    path.write_text(json.dumps({"classes": [{"id": "http://c/A", key: "http://c/B"}]}))
    with pytest.raises(UnsupportedConstruct):
        load_ontology(path)


@pytest.mark.parametrize("doc", [
    {"classes": [{"has_value": []}]},
    {"classes": [{"id": "http://c/A"}]},
    {"classes": [{"id": "http://c/A", "has_value": [{"property": "http://p/"}]}]},
    {"classes": [{"id": "http://c/A", "intersection_of": ["http://c/B"]}]},
    {"things": []},
])
def test_format_errors(tmp_path, doc):
    path = tmp_path / "o.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_ontology(path)


def test_json_round_trip(tmp_path, intersection_ontology):
    onto = Ontology(dict(intersection_ontology.classes, **{
        "http://c/Lit": ClassDefinition("http://c/Lit", ("http://c/Prim",),
                                        (("http://p/age", Literal("42", "http://www.w3.org/2001/XMLSchema#integer")),)),
    }), frozenset({"http://c/Prim"}))
    path = tmp_path / "o.json"
    save_ontology(onto, path)
    assert load_ontology(path) == onto


def test_rewrite_patterns_only_touches_defined_classes(flat_ontology):
    other = TriplePattern(X, IRI(RDF_TYPE), IRI("http://c/Primitive"))
    rewritten = rewrite_patterns([TriplePattern(X, IRI(RDF_TYPE), IRI(PTF)), other], flat_ontology)
    assert rewritten == expand_class(flat_ontology, PTF, X) + [other]


props = st.sampled_from([f"http://p/{i}" for i in range(4)])
values = st.sampled_from([IRI(f"http://v/{i}") for i in range(3)])
leaf_defs = st.lists(st.tuples(props, values), min_size=1, max_size=3)


@given(st.lists(leaf_defs, min_size=1, max_size=4))
def test_flattening_is_dedup_concatenation(members):
    classes = {f"http://c/M{i}": ClassDefinition(f"http://c/M{i}", (), tuple(hv)) for i, hv in enumerate(members)}
    top = ClassDefinition("http://c/Top", tuple(classes))
    onto = Ontology(dict(classes, **{"http://c/Top": top}))
    expected = list(dict.fromkeys(p for m in classes for p in expand_class(onto, m, "x")))
    assert expand_class(onto, "http://c/Top", "x") == expected
