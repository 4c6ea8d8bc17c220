"""Exception hierarchy shared by every mevflow module."""


class MevflowError(Exception):
    """Base class for all errors raised by mevflow."""


class AddressError(MevflowError, ValueError):
    pass


class DecodeError(MevflowError, ValueError):
    """A Transfer log matched the signature but its payload is malformed."""

    def __init__(self, message: str, log_index: int):
        super().__init__(f"log {log_index}: {message}")
        self.log_index = log_index


class CorpusError(MevflowError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class RpcError(MevflowError):
    pass


class BlockNotFound(RpcError):
    pass


class RetryExhausted(RpcError):
    pass


class RegistryError(MevflowError, ValueError):
    pass


class FeatureError(MevflowError, ValueError):
    pass


class ShapeError(MevflowError, ValueError):
    pass


class CheckpointError(MevflowError, ValueError):
    pass


class TrainingDiverged(MevflowError, RuntimeError):
    pass


class DatasetError(MevflowError, ValueError):
    pass


class GenerationError(MevflowError, RuntimeError):
    """A planted pattern failed its own detector/classifier post-check."""


class MetricsError(MevflowError, ValueError):
    pass
