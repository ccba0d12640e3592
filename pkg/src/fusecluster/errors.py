"""Exception types raised across the pipeline."""


class FuseClusterError(Exception):
    """Base class for all package errors."""


class DataError(FuseClusterError):
    """Input data is malformed or inconsistent."""


class ConfigError(FuseClusterError):
    """A configuration file or parameter is invalid."""


class DimensionError(DataError):
    pass


class UnknownFeature(DataError):
    def __init__(self, token, doc_id):
        super().__init__(f"token {token!r} in document {doc_id!r} is not in the vocabulary")
        self.token = token
        self.doc_id = doc_id


class VocabularyMismatch(DataError):
    pass


class DuplicateDocument(DataError):
    pass


class InsufficientData(DataError):
    pass


class IdMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class NegativeInput(DataError):
    pass


class InvalidRank(DataError):
    pass


class DegeneratePartition(DataError):
    """Null-model variance of the pair count is zero."""


class NumericalError(FuseClusterError):
    """Factorization produced non-finite values."""
