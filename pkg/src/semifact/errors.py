"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SemifactError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SemifactError):
    """A CoNLL record could not be parsed."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class LabelError(ParseError):
    """A tag read from input is not part of the active label scheme."""

    def __init__(self, line: int, tag: str):
        super().__init__(line, f"tag {tag!r} is not in the label scheme")
        self.tag = tag


class SchemeViolationError(SemifactError):
    """A tag sequence breaks the structural rules of its scheme."""

    def __init__(self, sentence_id: str, position: int, message: str):
        super().__init__(f"sentence {sentence_id!r}, position {position}: {message}")
        self.sentence_id = sentence_id
        self.position = position


class MissingPoolError(SemifactError):
    """The entity base has no pool for the requested tag."""

    def __init__(self, tag: str):
        super().__init__(f"no replacement pool for tag {tag!r}")
        self.tag = tag


class MissingLabelWordError(SemifactError):
    """No label word could be assigned for one or more tags."""

    def __init__(self, tags: list[str]):
        super().__init__(f"no label word for tags: {', '.join(tags)}")
        self.tags = tags


class TransportError(SemifactError):
    """A remote backend could not be reached or timed out."""

    def __init__(self, endpoint: str, elapsed: float, message: str):
        super().__init__(f"{endpoint} after {elapsed:.3f}s: {message}")
        self.endpoint = endpoint
        self.elapsed = elapsed


class ProtocolError(SemifactError):
    """A remote backend answered with a malformed or invalid payload."""

    def __init__(self, message: str, payload_excerpt: str = ""):
        detail = f"{message}: {payload_excerpt}" if payload_excerpt else message
        super().__init__(detail)
        self.payload_excerpt = payload_excerpt


class ConfigError(SemifactError):
    """A run configuration value is out of range or inconsistent."""


class StageError(SemifactError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class InternalError(SemifactError):
    """An invariant the code is supposed to uphold was broken."""
