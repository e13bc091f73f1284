"""Exception hierarchy shared across the package."""


class GrassrootsError(Exception):
    """Base class for all package errors."""


class DecodeError(GrassrootsError):
    """Wire bytes are not a canonical encoding."""


class UnresolvedPredecessorError(GrassrootsError):
    """A referenced predecessor hash is not resolved locally."""


class SelfChainViolationError(GrassrootsError):
    """A correct-agent block must extend the creator's own latest block."""


class InvalidBlockError(GrassrootsError):
    """Attempt to insert a block that fails validation."""


class IncompleteConeError(GrassrootsError):
    """Cone queried for a block that is not resolved."""


class NotAnEquivocationError(GrassrootsError):
    """A doublespend ruling was requested for blocks that do not equivocate."""


class ScenarioError(GrassrootsError):
    """Scenario file is malformed; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantViolation(GrassrootsError):
    """A self-checked run violated a protocol invariant."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        super().__init__(f"invariant violated: {invariant}" + (f" ({detail})" if detail else ""))
