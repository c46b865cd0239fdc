"""Exception hierarchy used across the package."""


class GaanError(Exception):
    """Base class for all package errors."""


class GraphError(GaanError, ValueError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class EndpointOutOfRange(GraphError, IndexError):
    pass


class SmilesError(GaanError, ValueError):
    """Raised when a SMILES string falls outside the supported subset.

    The byte offset of the offending character is kept on ``position``.
    """

    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnbalancedParenthesis(SmilesError):
    pass


class UnmatchedRingClosure(SmilesError):
    pass


class UnsupportedSymbol(SmilesError):
    pass


class ParseError(GaanError, ValueError):
    pass


class RowCountMismatch(GaanError, ValueError):
    pass


class DimensionMismatch(GaanError, ValueError):
    pass


class AllLabelsMissing(GaanError, ValueError):
    pass


class SingleClassTask(GaanError, ValueError):
    pass


class NonFiniteGradient(GaanError, FloatingPointError):
    pass


class ArchitectureError(GaanError, ValueError):
    """Malformed architecture string; ``token`` names the bad piece."""

    def __init__(self, message, token=None):
        super().__init__(message if token is None else f"{message}: {token!r}")
        self.token = token


class CheckpointMismatch(GaanError, ValueError):
    pass
