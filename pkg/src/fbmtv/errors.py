"""Exception hierarchy shared by every module."""


class FbmTvError(Exception):
    """Base class for all errors raised by fbmtv."""


class ValidationError(FbmTvError, ValueError):
    """Invalid argument or malformed input file."""


class GridError(ValidationError):
    """A requested time does not coincide with a sample time of the path."""

    def __init__(self, endpoint: str, value: float, message: str):
        super().__init__(f"{endpoint}={value!r}: {message}")
        self.endpoint = endpoint
        self.value = value


class EmbeddingError(FbmTvError):
    """Circulant embedding produced a significantly negative eigenvalue."""


class BudgetExceeded(ValidationError):
    """An exhaustive search was asked to enumerate too many configurations."""


class UnderpoweredError(FbmTvError):
    """A tail experiment has too few exceedances to fit anything."""

    def __init__(self, message: str, largest_usable_v: float | None = None):
        super().__init__(message)
        self.largest_usable_v = largest_usable_v


class InvariantViolation(FbmTvError):
    """An identity that must hold exactly was violated (indicates a bug)."""

    def __init__(self, message: str, seed: int | None = None, replica: int | None = None):
        if seed is not None:
            message = f"{message} (seed={seed}, replica={replica})"
        super().__init__(message)
        self.seed = seed
        self.replica = replica


class ReplicaFailure(FbmTvError):
    """A Monte Carlo replica raised; carries the replica index and its seed."""

    def __init__(self, message: str, seed: int, replica: int):
        super().__init__(f"replica {replica} (seed={seed}) failed: {message}")
        self.seed = seed
        self.replica = replica
