"""Exception hierarchy shared across the package."""


class PatienceError(Exception):
    """Base class for all domain errors raised by this package."""


class KnowledgeBaseError(PatienceError):
    """Knowledge-base file is missing, malformed, or internally inconsistent."""


class RetrievalError(PatienceError):
    """Symptom retrieval was called with unusable inputs."""


class DistributionError(PatienceError):
    """A disease distribution violates its invariants or cannot be built."""


class LookaheadError(PatienceError):
    """A lookahead table is incomplete or carries no usable signal."""


class SelectionError(PatienceError):
    """Question selection was called with an empty or invalid candidate pool."""


class BackendError(PatienceError):
    """A generator backend failed or became unavailable."""


class ScriptedMissError(BackendError):
    """Strict-mode scripted backend had no entry for a request."""


class ElicitationError(BackendError):
    """Generator output could not be parsed even after reprompt and repair."""


class EngineStateError(PatienceError):
    """A dialogue operation was applied to a state that does not allow it."""


class CaseFileError(PatienceError):
    """A patient case file is missing fields or inconsistent with the KB."""


class PolicyError(PatienceError):
    """An unknown question-selection policy name was requested."""


class ReportError(PatienceError):
    """Metrics report emission failed."""
