"""Exception taxonomy shared across the pipeline.

Two broad families matter for CLI exit codes: ValidationError (bad inputs,
broken invariants -> exit 1) and ProviderError (LLM transport trouble ->
exit 2).
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for everything raised on purpose by this package."""


class ValidationError(PipelineError):
    """Input data or requested operation violates a documented contract."""


class ProviderError(PipelineError):
    """An LLM provider call failed in a way retries could not fix."""


# --- corpus ---------------------------------------------------------------

class DuplicateId(ValidationError):
    def __init__(self, chart_id: str):
        self.chart_id = chart_id
        super().__init__(f"duplicate chart_id {chart_id!r}")


class MissingField(ValidationError):
    def __init__(self, field: str, line: int):
        self.field = field
        self.line = line
        super().__init__(f"line {line}: missing field {field!r}")


class MalformedLine(ValidationError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnknownChartId(ValidationError):
    def __init__(self, chart_id: str):
        self.chart_id = chart_id
        super().__init__(f"unknown chart_id {chart_id!r}")


class NonBinaryValue(ValidationError):
    def __init__(self, chart_id: str, value):
        self.chart_id = chart_id
        self.value = value
        super().__init__(f"chart {chart_id!r}: complexity values must be 0 or 1, got {value!r}")


class WrongArity(ValidationError):
    def __init__(self, n: int):
        self.n = n
        super().__init__(f"complexity vector needs exactly 10 values, got {n}")


class DanglingChartRef(ValidationError):
    def __init__(self, paper_id: str, chart_id: str):
        self.paper_id = paper_id
        self.chart_id = chart_id
        super().__init__(f"paper {paper_id!r} references unknown chart {chart_id!r}")


# --- complexity statistics ------------------------------------------------

class EmptySet(ValidationError):
    pass


class MissingCCV(ValidationError):
    def __init__(self, chart_id: str):
        self.chart_id = chart_id
        super().__init__(f"chart {chart_id!r} has no complexity vector")


class UnknownDomain(ValidationError):
    def __init__(self, domain: str):
        self.domain = domain
        super().__init__(f"no charts in domain {domain!r}")


class EmptyDomain(ValidationError):
    def __init__(self, domain: str):
        self.domain = domain
        super().__init__(f"domain {domain!r} has no annotated charts")


# --- chart selection ------------------------------------------------------

class InsufficientCharts(ValidationError):
    def __init__(self, available: int, needed: int):
        self.available = available
        self.needed = needed
        super().__init__(f"need {needed} annotated charts, corpus has {available}")


class TooLarge(ValidationError):
    def __init__(self, n: int, k: int):
        self.n = n
        self.k = k
        super().__init__(f"exhaustive search refused for n={n}, k={k} (limits: n<=20, k<=8)")


# --- providers ------------------------------------------------------------

class ProviderFailure(ProviderError):
    def __init__(self, model_id: str, reason: str = ""):
        self.model_id = model_id
        super().__init__(f"provider {model_id!r} failed{': ' + reason if reason else ''}")


class TransientExhausted(ProviderError):
    def __init__(self, model_id: str, attempts: int):
        self.model_id = model_id
        self.attempts = attempts
        super().__init__(f"provider {model_id!r}: still failing after {attempts} attempts")


class AuthMissing(ProviderError):
    def __init__(self, env_var: str):
        self.env_var = env_var
        super().__init__(f"environment variable {env_var!r} is not set")


class PayloadTooLarge(ProviderError):
    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"request payload {size} chars exceeds limit {limit}")


# --- abstract selection / generation / filtering ---------------------------

class UnparseableRelevance(ProviderError):
    def __init__(self, chart_id: str, raw: str):
        self.chart_id = chart_id
        self.raw = raw
        super().__init__(f"no usable relevance score for chart {chart_id!r}")


class UnknownCategory(ValidationError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"unknown question category {category!r}")


class MissingPaperContext(ValidationError):
    def __init__(self):
        super().__init__("knowledge-based questions need paper context text")


class UnparseableOutput(ProviderError):
    def __init__(self, detail: str = ""):
        super().__init__(f"could not parse question/answer from provider output{': ' + detail if detail else ''}")


class EmptyGeneration(ProviderError):
    def __init__(self):
        super().__init__("provider produced an empty question or answer")


class QuotaInfeasible(ValidationError):
    def __init__(self, detail: str):
        super().__init__(f"quota cannot be satisfied: {detail}")


class UnparseableVerdict(ProviderError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__("could not parse a keep/delete verdict from provider output")


class IdMismatch(ValidationError):
    def __init__(self, only_left: set, only_right: set):
        self.only_left = only_left
        self.only_right = only_right
        super().__init__(
            f"label files cover different qa_ids ({len(only_left)} only on one side, "
            f"{len(only_right)} only on the other)"
        )


class DegenerateMarginals(ValidationError):
    def __init__(self):
        super().__init__("both raters used a single label; chance agreement is 1 and kappa is undefined")


# --- review workflow --------------------------------------------------------

class NotEnoughReviewers(ValidationError):
    def __init__(self, available: int):
        self.available = available
        super().__init__(f"need at least 2 reviewers, got {available}")


class AlreadySubmitted(ValidationError):
    def __init__(self, assignment_id: str):
        self.assignment_id = assignment_id
        super().__init__(f"assignment {assignment_id!r} already has a label")


class UnknownAssignment(ValidationError):
    def __init__(self, assignment_id: str):
        self.assignment_id = assignment_id
        super().__init__(f"unknown assignment {assignment_id!r}")


class RoundIncomplete(ValidationError):
    def __init__(self, qa_id: str):
        self.qa_id = qa_id
        super().__init__(f"review round for {qa_id!r} still has pending assignments")


class CommentRequired(ValidationError):
    def __init__(self):
        super().__init__("a Flawed label must carry a comment")


class EmptyGroup(ValidationError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no ratings for group {key!r}")


# --- evaluation -------------------------------------------------------------

class MissingAxis(ValidationError):
    def __init__(self, qa_id: str = ""):
        self.qa_id = qa_id
        super().__init__(f"numeric scoring needs axis metadata{' for ' + qa_id if qa_id else ''}")


class NonPositiveOnLogAxis(ValidationError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"value {value} cannot be placed on a logarithmic axis")


class UnparseableScore(ProviderError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__("judge reply contained no usable numeric score")


class LengthMismatch(ValidationError):
    def __init__(self, n_left: int, n_right: int):
        super().__init__(f"paired vectors differ in length: {n_left} vs {n_right}")


class ZeroVariance(ValidationError):
    def __init__(self):
        super().__init__("correlation undefined: one of the score vectors is constant")


class UnknownQaId(ValidationError):
    def __init__(self, qa_id: str):
        self.qa_id = qa_id
        super().__init__(f"answer references unknown qa_id {qa_id!r}")
