"""Exception hierarchy; the CLI maps these onto exit codes."""


class RoughGGError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(RoughGGError):
    """Malformed or out-of-contract input (exit code 2)."""

    exit_code = 2


class DomainSyntaxError(InputError):
    """Unparseable domain document; carries line/column when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class DomainSemanticError(InputError):
    """Well-formed document with invalid content (negative radius, ...)."""


class GridTooCoarseError(InputError):
    """The grid cannot resolve the requested feature."""


class CrackPlacementError(InputError):
    """A crack facet is not interior to the indicator body."""


class InvariantViolation(RoughGGError):
    """A stated invariant failed post-hoc audit (exit code 1)."""

    exit_code = 1


class CompatibilityError(RoughGGError):
    """Prescribed trace data violates a conservation constraint (exit 3)."""

    exit_code = 3
