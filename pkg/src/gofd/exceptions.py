"""Exception hierarchy.

Every error carries a ``kind`` (the class name) so the command-line front end
can report it as machine-readable JSON.
"""


class GofdError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def kind(self):
        return type(self).__name__


# spectral_kernel
class ResolutionTooLow(GofdError, ValueError):
    pass


class QuadratureNotConverged(GofdError, RuntimeError):
    pass


# fd_operator
class GridMismatch(GofdError, ValueError):
    pass


class TooLargeForOracle(GofdError, ValueError):
    pass


# point_cloud
class ParseError(GofdError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append("line %d" % line)
        if where:
            message = "%s: %s" % (":".join(where), message)
        super().__init__(message)


class TagError(GofdError, ValueError):
    pass


class DuplicatePoints(GofdError, ValueError):
    pass


class EmptyCloud(GofdError, ValueError):
    pass


class PerturbationStuck(GofdError, RuntimeError):
    pass


class KTooLarge(GofdError, ValueError):
    pass


# transfer
class DegenerateNeighborhood(GofdError, ArithmeticError):
    pass


class ConstraintUnsatisfiable(GofdError, ValueError):
    pass


class DegenerateInput(GofdError, ValueError):
    pass


# gofd_solver
class GridTooLarge(GofdError, MemoryError):
    pass


class DimensionMismatch(GofdError, ValueError):
    pass


class SingularD(GofdError, ArithmeticError):
    def __init__(self, message, indices=()):
        self.indices = list(indices)
        super().__init__(message)


class CgStalled(GofdError, RuntimeError):
    def __init__(self, message, iterations=None, relative_residual=None):
        self.iterations = iterations
        self.relative_residual = relative_residual
        super().__init__(message)


# error_metrics
class MissingTriangulation(GofdError, ValueError):
    pass


class TooFewLevels(GofdError, ValueError):
    pass
