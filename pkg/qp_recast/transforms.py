# qp_recast/transforms.py

"""
Format-preserving manipulations of QP systems.

Quasimonomial and new-time transformations keep the dimension; the two
embeddings raise it; `decouple` lowers it once trailing variables no longer
feed back; `permute_*` make reorderings explicit and `canonicalize` steps
record the merging of a non-canonical input. Every manipulation can be
recorded as a TransformStep and replayed with `apply_step`.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionMismatch,
    IrrationalCoefficient,
    NonPositiveState,
    NotApplicable,
    SingularMatrix,
)
from .exactalg import RMatrix, inverse, rank, rational_vector
from .qpmodel import QPSystem, as_float_array, canonicalize

logger = logging.getLogger(__name__)


class StepKind(str, Enum):
    QUASIMONOMIAL = "quasimonomial"
    NEW_TIME = "new_time"
    EMBED_CONSTANTS = "embed_constants"
    EMBED_DECOUPLED = "embed_decoupled"
    PERMUTE = "permute"
    DECOUPLE = "decouple"
    CANONICALIZE = "canonicalize"


VARIABLES = "variables"
MONOMIALS = "quasimonomials"


@dataclass(frozen=True)
class TransformStep:
    """
    One replayable manipulation.

    matrix  -- C (quasimonomial), extra B block (embed_constants) or
               extra M rows (embed_decoupled)
    vector  -- beta (new_time) or constant-of-motion levels (decouple)
    order   -- permutation, new position i takes old index order[i]
    axis    -- VARIABLES or MONOMIALS for permute steps
    retained -- number of leading variables kept by decouple
    row     -- quasimonomial whose exponents a new-time step cancels
    names   -- variable labels after the step, when the step renames
    """

    kind: StepKind
    matrix: RMatrix = None
    vector: tuple = None
    order: tuple = None
    axis: str = None
    retained: int = None
    row: int = None
    names: tuple = None
    stage: str = ""
    dims_before: tuple = None
    dims_after: tuple = None

    def describe(self):
        dims = ""
        if self.dims_before and self.dims_after:
            dims = f" (n,m) {self.dims_before} -> {self.dims_after}"
        return f"{self.stage or '-'}: {self.kind.value}{dims}"


@dataclass(frozen=True)
class ProjectionOperator:
    """Idempotent matrix acting on log-coordinates of an embedded system."""

    P: RMatrix
    retained_count: int

    def apply(self, log_state):
        return as_float_array(self.P) @ np.asarray(log_state, dtype=float)

    def spurious_rows(self):
        """Indices (0-based) of rows past the retained block that are not zero."""
        return [
            i
            for i in range(self.retained_count, self.P.rows)
            if any(x != 0 for x in self.P.row(i))
        ]


def fresh_names(existing, count, prefix="w"):
    taken = set(existing)
    names = []
    k = 1
    while len(names) < count:
        candidate = f"{prefix}{k}"
        if candidate not in taken:
            names.append(candidate)
            taken.add(candidate)
        k += 1
    return tuple(names)


# ===================================================================
# DIMENSION-PRESERVING TRANSFORMS
# ===================================================================
def quasimonomial_transform(sys, C, var_names=None):
    """x_i = prod_k y_k^C_ik  gives  B' = B C, A' = C^-1 A, lambda' = C^-1 lambda."""
    if C.shape != (sys.n, sys.n):
        raise DimensionMismatch("C", f"C is {C.shape}, expected {(sys.n, sys.n)}")
    C_inv = inverse(C)
    result = QPSystem(
        C_inv.apply(sys.lam),
        C_inv @ sys.A,
        sys.B @ C,
        var_names if var_names is not None else sys.var_names,
    )
    return canonicalize(result)


def new_time_transform(sys, beta):
    """
    dt = (prod_k x_k^beta_k) dt'. Every exponent row shifts by beta and a
    nonzero lambda turns into a quasimonomial with exponent row beta.
    """
    beta = rational_vector(beta)
    if len(beta) != sys.n:
        raise DimensionMismatch("beta", f"beta has length {len(beta)}, expected {sys.n}")
    rows = [tuple(b + s for b, s in zip(sys.B.row(j), beta)) for j in range(sys.m)]
    columns = [sys.A.col(j) for j in range(sys.m)]
    if any(v != 0 for v in sys.lam):
        rows.append(beta)
        columns.append(sys.lam)
    shifted = QPSystem(
        (Fraction(0),) * sys.n,
        RMatrix.from_columns(columns, rows=sys.n),
        RMatrix(rows, cols=sys.n),
        sys.var_names,
    )
    return canonicalize(shifted)


def permute_variables(sys, order):
    order = list(order)
    if sorted(order) != list(range(sys.n)):
        raise DimensionMismatch("order", f"{order} is not a permutation of {sys.n} variables")
    return QPSystem(
        tuple(sys.lam[i] for i in order),
        sys.A.take_rows(order),
        sys.B.take_cols(order),
        tuple(sys.var_names[i] for i in order),
    )


def permute_monomials(sys, order):
    order = list(order)
    if sorted(order) != list(range(sys.m)):
        raise DimensionMismatch("order", f"{order} is not a permutation of {sys.m} quasimonomials")
    return QPSystem(sys.lam, sys.A.take_cols(order), sys.B.take_rows(order), sys.var_names)


# ===================================================================
# EMBEDDINGS AND DECOUPLING
# ===================================================================
def embed_constants(sys, extra_B, names=None):
    """B -> (B | extra_B), M -> M over zeros: p new variables that stay constant."""
    if extra_B.rows != sys.m:
        raise DimensionMismatch("extra_B", f"extra_B has {extra_B.rows} rows, expected {sys.m}")
    p = extra_B.cols
    names = names or fresh_names(sys.var_names, p)
    return QPSystem(
        sys.lam + (Fraction(0),) * p,
        sys.A.vstack(RMatrix.zeros(p, sys.m)),
        sys.B.hstack(extra_B),
        sys.var_names + tuple(names),
    )


def embed_decoupled(sys, extra_M, names=None):
    """B -> (B | 0), M -> M over extra_M: p new variables the old ones ignore."""
    if extra_M.cols != sys.m + 1:
        raise DimensionMismatch(
            "extra_M", f"extra_M has {extra_M.cols} columns, expected {sys.m + 1}"
        )
    p = extra_M.rows
    names = names or fresh_names(sys.var_names, p)
    return QPSystem(
        sys.lam + extra_M.col(0),
        sys.A.vstack(extra_M.take_cols(range(1, sys.m + 1))),
        sys.B.hstack(RMatrix.zeros(sys.m, p)),
        sys.var_names + tuple(names),
    )


def _exact_power(level, exponent):
    if level == 1 or exponent == 0:
        return Fraction(1)
    if exponent.denominator == 1:
        return level ** int(exponent)
    raise IrrationalCoefficient(f"{level}^({exponent}) is not rational")


def decouple(sys, retained, levels=None):
    """
    Keep the first `retained` variables. Without levels the dropped variables
    must be absent from every quasimonomial (they become quadratures); with
    levels they are constants of motion whose values are folded into A.
    """
    n = sys.n
    if not 0 < retained <= n:
        raise DimensionMismatch("retained", f"cannot retain {retained} of {n} variables")
    dropped = range(retained, n)
    factors = [Fraction(1)] * sys.m
    if levels is None:
        if any(sys.B[j, k] != 0 for j in range(sys.m) for k in dropped):
            raise NotApplicable("dropped variables still appear in quasimonomials")
    else:
        levels = rational_vector(levels)
        if len(levels) != n - retained or any(v <= 0 for v in levels):
            raise DimensionMismatch("levels", "one positive level per dropped variable")
        for j in range(sys.m):
            for level, k in zip(levels, dropped):
                factors[j] *= _exact_power(level, sys.B[j, k])
    kept = range(retained)
    A = RMatrix(
        [[sys.A[i, j] * factors[j] for j in range(sys.m)] for i in kept], cols=sys.m
    )
    reduced = QPSystem(
        sys.lam[:retained], A, sys.B.take_cols(kept), sys.var_names[:retained]
    )
    return canonicalize(reduced)


# ===================================================================
# COORDINATES AND PROJECTIONS
# ===================================================================
def map_point(x, C):
    """Coordinates y with ln y = C^-1 ln x, i.e. x_i = prod_k y_k^C_ik."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise NonPositiveState(f"point {x.tolist()} is not strictly positive")
    return np.exp(as_float_array(inverse(C)) @ np.log(x))


def projection_for(C, retained, total):
    """P' = C^-1 P_n C with P_n = diag(I_n, 0): the log-space retrieval operator."""
    if C.shape != (total, total):
        raise DimensionMismatch("C", f"C is {C.shape}, expected {(total, total)}")
    P_n = RMatrix.diagonal([1] * retained + [0] * (total - retained))
    P = inverse(C) @ P_n @ C
    if P @ P != P or rank(P) != retained:
        raise SingularMatrix("projection is not idempotent of the expected rank")
    return ProjectionOperator(P, retained)


# ===================================================================
# REPLAY
# ===================================================================
def apply_step(sys, step):
    kind = step.kind
    if kind == StepKind.QUASIMONOMIAL:
        result = quasimonomial_transform(sys, step.matrix, step.names)
    elif kind == StepKind.NEW_TIME:
        result = new_time_transform(sys, step.vector)
    elif kind == StepKind.EMBED_CONSTANTS:
        result = embed_constants(sys, step.matrix, step.names)
    elif kind == StepKind.EMBED_DECOUPLED:
        result = embed_decoupled(sys, step.matrix, step.names)
    elif kind == StepKind.PERMUTE:
        if step.axis == VARIABLES:
            result = permute_variables(sys, step.order)
        else:
            result = permute_monomials(sys, step.order)
    elif kind == StepKind.DECOUPLE:
        result = decouple(sys, step.retained, step.vector)
    elif kind == StepKind.CANONICALIZE:
        result = canonicalize(sys)
    else:
        raise ValueError(f"unknown step kind {kind!r}")
    return result


def stamp(step, before, after):
    """Attach before/after dimensions to a step."""
    return replace(step, dims_before=(before.n, before.m), dims_after=(after.n, after.m))


def replay(sys, trace):
    for step in trace:
        sys = apply_step(sys, step)
    return sys
