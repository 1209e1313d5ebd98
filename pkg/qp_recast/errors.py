# qp_recast/errors.py

"""Exception hierarchy shared by the library, the CLI and the HTTP service."""


class RecastError(Exception):
    """Base class for every error raised by qp_recast."""


# --- Exact algebra ---
class ExactAlgebraError(RecastError):
    pass


class SingularMatrix(ExactAlgebraError):
    pass


class NotSpanning(ExactAlgebraError):
    pass


# --- QP model ---
class ModelError(RecastError):
    pass


class DimensionMismatch(ModelError):
    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"dimension mismatch in '{field}'")


class NonPositiveState(ModelError):
    pass


# --- Reductions ---
class ReductionError(RecastError):
    pass


class NotApplicable(ReductionError):
    pass


class DegenerateSystem(NotApplicable):
    """Every quasimonomial vanished; what is left is a linear system."""


class NoSuitableRow(ReductionError):
    pass


class NotStandardized(ReductionError):
    pass


class BadMode(ReductionError):
    pass


class SingularBlock(ReductionError):
    pass


class IrrationalCoefficient(ReductionError):
    pass


# --- Numerics ---
class NumericError(RecastError):
    pass


class IntegrationError(NumericError):
    """Integration stopped early; `trajectory` holds what was computed."""

    def __init__(self, message, trajectory=None):
        self.trajectory = trajectory
        super().__init__(message)


class PositivityLost(IntegrationError):
    def __init__(self, t, trajectory=None):
        self.t = t
        super().__init__(
            f"trajectory left the positive orthant at t={t:.6g}", trajectory
        )


class StepFailure(IntegrationError):
    pass


class OffLevelSet(NumericError):
    pass


# --- Files and replay ---
class FileFormatError(RecastError):
    pass


class ParseError(FileFormatError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class ReplayMismatch(RecastError):
    pass
