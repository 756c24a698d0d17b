"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`EpsCtlError`.
The ``exit_code`` class attribute is what the command-line front end returns
when the error escapes a command.
"""


class EpsCtlError(Exception):
    exit_code = 4


class InputError(EpsCtlError):
    """Malformed input (bad shapes, non-finite entries, unparsable files)."""

    exit_code = 2


class DimensionMismatch(InputError):
    pass


class NonSquare(DimensionMismatch):
    pass


class NonSymmetricW(InputError):
    pass


class BadInterval(InputError):
    pass


class BadSpec(InputError):
    pass


class BadPlane(InputError):
    pass


class SchemaError(InputError):
    """A system file is missing a field or has a malformed one."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


# structural / stability problems: exit 3


class StructuralError(EpsCtlError):
    exit_code = 3


class AlphaOutOfRange(StructuralError):
    def __init__(self, alpha, lo, hi):
        super().__init__(
            f"alpha={alpha!r} outside admissible interval ({lo!r}, {hi!r})"
        )
        self.alpha = alpha
        self.lo = lo
        self.hi = hi


class SingularLimit(AlphaOutOfRange):
    """alpha sits inside the guard band of an interval endpoint."""


class UnstableSystem(StructuralError):
    pass


class UnstableF(UnstableSystem):
    pass


class StructuralAssumptionViolated(StructuralError):
    def __init__(self, report):
        failed = ", ".join(c.name for c in report.failures)
        super().__init__(f"structural assumptions violated: {failed}")
        self.report = report


class NotPositiveDefinite(StructuralError):
    pass


# numerical failures: exit 4


class SolverError(EpsCtlError):
    exit_code = 4


class EigenFailure(SolverError):
    pass


class NoStabilizingSolution(SolverError):
    pass


class SingularInnerMatrix(SolverError):
    pass


class SeparationCheckFailed(SolverError):
    """Independent recomputation of a closed-loop norm disagreed."""


class DualityCheckFailed(SolverError):
    pass


class AllInfeasible(SolverError):
    pass


class SimulationOverflow(SolverError):
    pass
