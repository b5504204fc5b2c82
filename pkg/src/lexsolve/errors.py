"""Exception types shared across the package."""

from __future__ import annotations


class LexsolveError(Exception):
    """Base class for all domain errors raised by lexsolve."""


class SchemaError(LexsolveError):
    """A case record is missing a required field."""

    def __init__(self, schema: str, missing: list[str]):
        self.schema = schema
        self.missing = list(missing)
        super().__init__(f"{schema} record missing required field(s): {', '.join(self.missing)}")


class RuleSyntaxError(LexsolveError):
    """Rule-language text could not be parsed."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class DuplicateClauseId(LexsolveError):
    pass


class KBNotValidated(LexsolveError):
    pass


class ConflictingFacts(LexsolveError):
    def __init__(self, predicate: str, values: list[object]):
        self.predicate = predicate
        self.values = list(values)
        super().__init__(f"conflicting values for {predicate}: {self.values!r}")


class NotUnsat(LexsolveError):
    pass


class EmptyUnion(LexsolveError):
    pass


class ExtractorUnavailable(LexsolveError):
    pass


class ServiceError(LexsolveError):
    pass


class ParseError(LexsolveError):
    pass


class UngroundedFact(LexsolveError):
    pass


class UnknownRule(LexsolveError):
    pass


class RuleLabelMismatch(LexsolveError):
    pass


class EmptyInput(LexsolveError):
    pass


class NoCleanCorrect(LexsolveError):
    pass


class MissingBaseline(LexsolveError):
    pass
