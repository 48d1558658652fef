from typing import Optional


class HybridRagError(Exception):
    pass


class GatewayError(HybridRagError):
    pass


class TransportError(GatewayError):
    pass


class AuthError(GatewayError):
    pass


class EmptyResponse(GatewayError):
    pass


class DimensionMismatch(HybridRagError, ValueError):
    def __init__(self, expected: int, received: int):
        self.expected = expected
        self.received = received
        super().__init__(
            f"Embedding dimension mismatch: expected {expected}, received {received}."
        )


class InvalidQuery(HybridRagError, ValueError):
    pass


class InvalidConfig(HybridRagError, ValueError):
    pass


class TokenBudgetUnsatisfiable(HybridRagError, ValueError):
    pass


class UnparseableLabel(HybridRagError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(
            f"Router expected exactly one of TEMPORAL or FACTUAL, received: {raw!r}"
        )


class CorpusParseError(HybridRagError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        self.message = message
        super().__init__(f"line {line_no}: {message}")


class StoreFileError(HybridRagError):
    pass


class VersionMismatch(StoreFileError):
    pass


class ChecksumMismatch(StoreFileError):
    pass


class FormatError(HybridRagError):
    def __init__(self, record_id: Optional[str], message: str):
        self.record_id = record_id
        super().__init__(f"record {record_id}: {message}")


class StageError(HybridRagError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class UnsupportedStrategy(HybridRagError, NotImplementedError):
    pass
