"""Exception types shared across the engine."""


class MosaicError(Exception):
    """Base class for every engine-raised error."""


# --- corpus ---------------------------------------------------------------

class CorpusEmpty(MosaicError):
    """Corpus directory contains no problem files."""


class SchemaViolation(MosaicError):
    """A corpus record is missing a field or carries an ill-typed value."""

    def __init__(self, message: str, *, file: str = "", field: str = ""):
        detail = message
        if file or field:
            detail = f"{message} (file={file or '?'}, field={field or '?'})"
        super().__init__(detail)
        self.file = file
        self.field = field


class DuplicateId(MosaicError):
    """A problem or subproblem identifier appears more than once."""


class SplitOverlap(MosaicError):
    """A problem id is listed in both the validation and the test split."""


class NonOverlapViolation(MosaicError):
    """A selected teacher exemplar also appears in the test split."""


class MissingDomainLabel(MosaicError):
    """Passthrough domain assignment found no stored label."""


class UnparsableClassification(MosaicError):
    """A domain-classification response named no known domain."""


# --- backend ---------------------------------------------------------------

class BackendError(MosaicError):
    """Base class for completion-backend failures."""


class BackendTimeout(BackendError):
    """The per-request deadline elapsed, retries included."""


class BackendHTTP(BackendError):
    """The endpoint returned a non-retryable HTTP failure."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}: {message}" if message else f"HTTP {status}")
        self.status = status


class ReplayMiss(BackendError):
    """A scripted store holds no response for the request digest."""


class CredentialMissing(BackendError):
    """Live mode requested but the API key env var is unset."""


# --- teacher ---------------------------------------------------------------

class RationaleParse(MosaicError):
    """No numbered solution steps found in a rationale response."""


class CritiqueParse(MosaicError):
    """No verdict token found in a critique response."""


class EmptyExemplarSet(MosaicError):
    """A guidance template was requested for zero refined exemplars."""


class DomainMismatch(MosaicError):
    """Refined exemplars from different domains were mixed."""


# --- student ---------------------------------------------------------------

class PlanParse(MosaicError):
    """No numbered plan steps found in a planning response."""


class CodeExtraction(MosaicError):
    """No fenced code block found in a generation response."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class SignatureMismatch(MosaicError):
    """Generated code does not define the required function name/arity."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


# --- grounding ---------------------------------------------------------------

class RunnerProtocol(MosaicError):
    """Runner output did not parse as the documented record schema."""


class RunnerSpawn(MosaicError):
    """The runner executable could not be started."""


class UnknownPhase(MosaicError):
    """A runner record carries a phase outside load/call/compare/none."""


# --- evaluator ---------------------------------------------------------------

class IncompleteResults(MosaicError):
    """A problem is missing (or duplicates) a subproblem result."""


class NegativeDeviation(MosaicError):
    """A deviation outside [0, infinity] was offered for binning."""


# --- driver ---------------------------------------------------------------

class ConfigInvalid(MosaicError):
    """A pipeline config file carries unknown keys or out-of-range values."""
