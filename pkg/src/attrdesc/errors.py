"""Exception hierarchy shared across the toolkit."""


class AttrDescError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(AttrDescError):
    """Invalid attribute schema, distribution parameters, or config document."""


class StatsError(AttrDescError):
    """Invalid feature data or a failed statistics computation."""


class NotPSDError(StatsError):
    """Matrix is too far from positive semidefinite to take a square root."""


class DimensionMismatchError(StatsError):
    """Two statistics objects with incompatible dimensions."""

    def __init__(self, dim_a: int, dim_b: int):
        super().__init__(f"dimension mismatch {dim_a} vs {dim_b}")
        self.dim_a = dim_a
        self.dim_b = dim_b


class FormatError(AttrDescError):
    """Malformed or truncated on-disk file."""


class ProtocolError(AttrDescError):
    """Wire-protocol violation: malformed message, desync, or timeout."""


class PeerError(ProtocolError):
    """Error reported by the remote renderer peer; message passed through verbatim."""


class OptimizerError(AttrDescError):
    """Invalid optimizer inputs (off-grid init, bad budget or hyperparameters)."""
