"""Exception hierarchy shared across the toolkit.

Operations that check things return lists of Violation values (see
blockbpm.model); exceptions are reserved for contract breaches where no
partial result makes sense.
"""

from __future__ import annotations


class BlockBpmError(Exception):
    """Base class for all toolkit errors."""

    code = "Error"

    def __init__(self, message: str = "", details: object = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details


class InvalidModelError(BlockBpmError):
    """A model could not be built; carries the complete violation list."""

    code = "InvalidModel"

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations)
        super().__init__(f"model invalid: {summary}", details=self.violations)


class UnknownSubjectError(BlockBpmError):
    code = "UnknownSubject"


class ExternalBehaviorError(BlockBpmError):
    """Raised when a behavior view is requested for an external subject."""

    code = "ExternalHasNoBehavior"


class SameBlockError(BlockBpmError):
    code = "SameBlock"


class UnknownBlockError(BlockBpmError):
    code = "UnknownBlock"


class UnknownKindError(BlockBpmError):
    """A block references a kind absent from the notation."""

    code = "UnknownKind"


class InvalidNotationError(BlockBpmError):
    code = "InvalidNotation"

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations)
        super().__init__(f"notation invalid: {summary}", details=self.violations)


class NonConformantError(BlockBpmError):
    """Diagram cannot be translated; violation codes include AmbiguousDirection."""

    code = "NonConformant"

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations)
        super().__init__(f"diagram not translatable: {summary}", details=self.violations)


class ModelInvalidError(BlockBpmError):
    """Execution refused because the model fails validation."""

    code = "ModelInvalid"

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations)
        super().__init__(f"cannot instantiate: {summary}", details=self.violations)


class BadMultiplicityError(BlockBpmError):
    code = "BadMultiplicity"


class NotExternalError(BlockBpmError):
    code = "NotExternal"


class NoSuchChannelError(BlockBpmError):
    code = "NoSuchChannel"


class BadPayloadError(BlockBpmError):
    code = "BadPayload"


class NotRunningError(BlockBpmError):
    code = "NotRunning"


class WitnessMismatchError(BlockBpmError):
    """A witness could not be replayed; signals engine/explorer divergence."""

    code = "WitnessMismatch"


class PersistenceError(BlockBpmError):
    code = "PersistenceError"


class MalformedDocumentError(PersistenceError):
    code = "MalformedDocument"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}", details={"line": line, "column": column})
        self.line = line
        self.column = column


class UnsupportedVersionError(PersistenceError):
    code = "UnsupportedVersion"

    def __init__(self, version):
        super().__init__(f"unsupported document format version {version!r}", details=version)
        self.version = version


class SemanticViolationError(PersistenceError):
    """Document parsed as XML/JSON but does not describe a valid model."""

    code = "SemanticViolation"

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations)
        super().__init__(f"document semantically invalid: {summary}", details=self.violations)
