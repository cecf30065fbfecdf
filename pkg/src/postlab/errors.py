"""Exception hierarchy shared by all postlab modules."""


class PostlabError(Exception):
    """Base class for every error raised by postlab."""


class DimensionMismatch(PostlabError, ValueError):
    pass


class NotHermitian(PostlabError, ValueError):
    pass


class NotNormalized(PostlabError, ValueError):
    pass


class NumericFailure(PostlabError, ArithmeticError):
    """An eigensolver or factorization did not converge or lost accuracy."""


class CommutationError(PostlabError, ValueError):
    pass


class ClusterAmbiguity(PostlabError, ValueError):
    """Eigenvalues sit too close to the clustering tolerance to be grouped safely."""


class InvalidDecomposition(PostlabError, ValueError):
    pass


class InvariantViolation(PostlabError, RuntimeError):
    pass


class OffSupportError(PostlabError, ValueError):
    """Collapse was requested onto a branch whose projection vanishes."""


class HardMismatch(PostlabError, ValueError):
    """An outcome with zero expected probability was observed."""


class PreconditionError(PostlabError, ValueError):
    pass


class LeafBudgetExceeded(PostlabError, RuntimeError):
    pass


class ConfigError(PostlabError, ValueError):
    """Invalid configuration document; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")
