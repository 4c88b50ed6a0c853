"""Exception types raised across the toolkit."""


class TflmError(ValueError):
    """Base class for all toolkit errors."""


# grammar / parsing
class GrammarError(TflmError):
    pass


class UnknownSymbol(GrammarError):
    pass


class NoRuleForNonterminal(GrammarError):
    pass


class DuplicateRuleId(GrammarError):
    pass


class MiniCSyntaxError(TflmError, SyntaxError):
    """Malformed MiniC source. Carries ``line`` and ``column`` (1-based)."""

    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")
        self.msg = self.args[0]
        self.lineno = line
        self.offset = column

    def __str__(self):
        return self.msg


class EmptyProgram(TflmError):
    pass


# spectra
class NoTests(TflmError):
    pass


# sum-product networks
class SpnError(TflmError):
    pass


class CycleDetected(SpnError):
    pass


class IncompleteSum(SpnError):
    pass


class NonDecomposableProduct(SpnError):
    pass


class NonPositiveWeight(SpnError):
    pass


class DomainMismatch(SpnError):
    pass


class QueryInEvidence(SpnError):
    pass


# model
class SpecError(TflmError):
    pass


class MissingDistribution(SpecError):
    pass


class UnnormalizedDistribution(SpecError):
    pass


class SubclassCountZero(SpecError):
    pass


class UnknownAttribute(SpecError):
    pass


class GrammarMismatch(SpecError):
    pass


class IncompleteAssignment(SpecError):
    pass


class BuggyObserved(SpecError):
    pass


# learning
class EmptyCorpus(TflmError):
    pass


class MissingSubclassLabel(TflmError):
    pass


# evaluation
class MissingPosterior(TflmError):
    pass


class NoBuggyLine(TflmError):
    pass


class InsufficientVersions(TflmError):
    pass


# corpus
class BuggyLineNotExecutable(TflmError):
    pass


class DepthExceeded(TflmError):
    pass
