"""Exception hierarchy.

Every error raised by the library derives from :class:`GraphScatterError`.
Errors caused by bad input data derive from :class:`DataError` so the CLI can
map them to a single exit code.
"""


class GraphScatterError(Exception):
    pass


class DataError(GraphScatterError):
    pass


class ConfigError(GraphScatterError):
    pass


# graph_core
class AsymmetricInput(DataError):
    pass


class IsolatedNode(DataError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class InvalidPermutation(DataError, ValueError):
    pass


class ConvergenceFailure(GraphScatterError):
    pass


class ConnectivityRetryExhausted(GraphScatterError):
    pass


# wavelets
class DegenerateSpectrum(DataError):
    pass


class SingularCubicSystem(GraphScatterError):
    pass


class ScaleOutOfRange(GraphScatterError, IndexError):
    pass


class DomainMismatch(GraphScatterError):
    pass


class ZeroFrameLowerBound(GraphScatterError):
    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


# scattering
class PathCountOverflow(GraphScatterError, OverflowError):
    pass


class ConfigMismatch(GraphScatterError):
    pass


# perturbation
class InfeasibleEps(GraphScatterError, ValueError):
    pass


class TooLargeForExact(GraphScatterError):
    pass


class BoundViolation(GraphScatterError):
    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


# classify
class EmptyDataset(DataError):
    pass


class SingleClassDataset(DataError):
    pass


class LengthMismatch(DataError, ValueError):
    pass


# wan_ingest
class EmptyCorpus(DataError):
    pass


class NoCooccurrences(DataError):
    pass


class EmptyExcerpt(DataError):
    pass


class InsufficientCorpus(DataError):
    pass
