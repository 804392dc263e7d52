"""SHARE: SPARQL queries and OWL classification resolved by web services."""

from share.engine import (
    Engine, FailurePolicy, InvocationCache, InvocationRecord, Outcome, ResolveOptions, SolutionTable,
    evaluate_bgp, invoke_service, resolve,
)
from share.ontology import ClassDefinition, Ontology, expand_class, load_ontology, save_ontology
from share.planner import PatternStep, QueryPlan, Strategy, explain, plan
from share.rdf import IRI, Graph, Literal, Term, Triple, Variable, parse_ntriples, serialize_ntriples
from share.reasoner import instances, is_instance, lift
from share.registry import Direction, Registry, ServiceDescriptor, Side, load_registry, save_registry
from share.sparql import Query, TriplePattern, parse_query, query_variables

__version__ = "0.1.0"

__all__ = [
    "ClassDefinition", "Direction", "Engine", "FailurePolicy", "Graph", "IRI", "InvocationCache",
    "InvocationRecord", "Literal", "Ontology", "Outcome", "PatternStep", "Query", "QueryPlan",
    "Registry", "ResolveOptions", "ServiceDescriptor", "Side", "SolutionTable", "Strategy", "Term",
    "Triple", "TriplePattern", "Variable", "evaluate_bgp", "expand_class", "explain", "instances",
    "invoke_service", "is_instance", "lift", "load_ontology", "load_registry", "parse_ntriples",
    "parse_query", "plan", "query_variables", "resolve", "save_ontology", "save_registry",
    "serialize_ntriples",
]
