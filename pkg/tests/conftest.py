import pytest

from share.harness import (
    ASSOCIATED_WITH_DISEASE, EX, GO, GO_INVERSE_SERVICE, GO_TERM, HAS_GO_TERM, OMIM, PDB, PROTEIN, SHARE,
    fixture_dataset, fixture_path, shutdown_all, spawn_fixture_network,
)
from share.ontology import load_ontology
from share.rdf import IRI
from share.registry import Direction, ServiceDescriptor

PTF = SHARE + "ParkinsonTranscriptionFactor"

P = {i: IRI(f"{EX}P{i}") for i in range(1, 6)}
GO_TRANSCRIPTION = IRI(GO + "0006351")
OMIM_PARKINSON = IRI(OMIM + "168600")
PDB_1ABC = IRI(PDB + "1ABC")
PDB_2XYZ = IRI(PDB + "2XYZ")

PARKINSON_QUERY = fixture_path("parkinson.rq").read_text()
STRUCTURES_QUERY = fixture_path("parkinson_structures.rq").read_text()

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}")


@pytest.fixture
def network():
    registry, handles = spawn_fixture_network()
    yield registry, {h.cfg.id: h for h in handles}
    shutdown_all(handles)


@pytest.fixture
def dataset():
    return fixture_dataset()


@pytest.fixture
def flat_ontology():
    return load_ontology(fixture_path("parkinson.json"))


@pytest.fixture
def intersection_ontology():
    return load_ontology(fixture_path("parkinson_intersection.json"))


def go_inverse_descriptor(endpoint="http://127.0.0.1:9/"):
    return ServiceDescriptor(
        id=GO_INVERSE_SERVICE, endpoint=endpoint, input_class=GO_TERM, output_class=PROTEIN,
        predicates=frozenset({HAS_GO_TERM}), direction=Direction.INVERSE)


__all__ = [
    "ASSOCIATED_WITH_DISEASE", "GO_TRANSCRIPTION", "HAS_GO_TERM", "OMIM_PARKINSON", "P", "PARKINSON_QUERY",
    "PDB_1ABC", "PDB_2XYZ", "PTF", "STRUCTURES_QUERY", "go_inverse_descriptor",
]
