"""Exception hierarchy shared by every SHARE module."""

from __future__ import annotations


class ShareError(Exception):
    """Base class for all errors raised by this package."""


class NTriplesError(ShareError, ValueError):
    """A malformed N-Triples statement."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class QuerySyntaxError(ShareError, ValueError):
    """Query text that is not valid in the supported SPARQL subset."""

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"position {position}: {reason}")


class UnsupportedFeature(ShareError):
    """Valid SPARQL, but outside the subset this engine evaluates."""

    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"unsupported SPARQL feature {name}{where}")


class InvalidDescriptor(ShareError, ValueError):
    pass


class FormatError(ShareError, ValueError):
    """A registry, ontology or harness file that does not follow its schema."""

    def __init__(self, where: str, reason: str):
        self.where = where
        self.reason = reason
        super().__init__(f"{where}: {reason}")


class RegistryError(ShareError, ValueError):
    pass


class OntologyError(ShareError, ValueError):
    pass


class UndefinedClass(OntologyError):
    def __init__(self, iri: str):
        self.iri = iri
        super().__init__(f"class <{iri}> is not defined")


class CyclicDefinition(OntologyError):
    def __init__(self, path: list[str]):
        self.path = list(path)
        super().__init__("cyclic class definition: " + " -> ".join(f"<{c}>" for c in path))


class UnsupportedConstruct(OntologyError):
    def __init__(self, construct: str, where: str = ""):
        self.construct = construct
        suffix = f" in {where}" if where else ""
        super().__init__(f"unsupported OWL construct {construct}{suffix}")


class ResolutionError(ShareError):
    """Raised while executing a query against the service network."""


class UnresolvablePattern(ResolutionError):
    def __init__(self, pattern, reason: str = "no binding source for its variables"):
        self.pattern = pattern
        super().__init__(f"unresolvable pattern {pattern}: {reason}")


class BudgetExceeded(ResolutionError):
    def __init__(self, budget: int, requested: int):
        self.budget = budget
        self.requested = requested
        super().__init__(f"service-call budget of {budget} exceeded ({requested} calls needed)")


class ServiceError(ResolutionError):
    """One failed service invocation."""

    outcome = "Error"

    def __init__(self, service_id: str, message: str):
        self.service_id = service_id
        super().__init__(f"<{service_id}>: {message}")


class ServiceTimeout(ServiceError):
    outcome = "Timeout"


class ServiceHttpError(ServiceError):
    outcome = "HttpError"

    def __init__(self, service_id: str, status: int | None, message: str = ""):
        self.status = status
        text = f"HTTP {status}" if status is not None else "connection failed"
        if message:
            text = f"{text} ({message})"
        super().__init__(service_id, text)


class BadPayload(ServiceError):
    outcome = "BadPayload"


class ServiceFailure(ResolutionError):
    """FailFast abort: carries the failing invocation record."""

    def __init__(self, record, records=()):
        self.record = record
        self.records = list(records)
        super().__init__(f"service <{record.service_id}> failed: {record.outcome_text}")


class BindError(ShareError, OSError):
    pass
