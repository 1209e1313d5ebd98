# qp_recast/qpmodel.py

"""
The quasipolynomial system

    dx_i/dt = x_i (lambda_i + sum_j A_ij prod_k x_k^B_jk),   i = 1..n

stored as exact matrices, with validation, canonical form and evaluation.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatch, NonPositiveState
from .exactalg import RMatrix, rank, rational_vector

logger = logging.getLogger(__name__)


def default_names(n, prefix="x"):
    return tuple(f"{prefix}{i + 1}" for i in range(n))


@dataclass(frozen=True)
class QPSystem:
    lam: tuple
    A: RMatrix
    B: RMatrix
    var_names: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "lam", rational_vector(self.lam))
        if self.var_names is None:
            object.__setattr__(self, "var_names", default_names(len(self.lam)))
        else:
            object.__setattr__(self, "var_names", tuple(self.var_names))

    @classmethod
    def from_lists(cls, lam, A, B, var_names=None):
        """Build from nested lists; an empty A or B still gets the right shape."""
        n = len(lam)
        A = RMatrix(A) if A else RMatrix.zeros(n, 0)
        B = RMatrix(B) if B else RMatrix.zeros(0, n)
        return cls(lam, A, B, var_names)

    @property
    def n(self):
        return len(self.lam)

    @property
    def m(self):
        return self.A.cols

    @property
    def M(self):
        """The composed matrix (lambda | A)."""
        return RMatrix.column(self.lam).hstack(self.A)

    def rename(self, var_names):
        return QPSystem(self.lam, self.A, self.B, tuple(var_names))

    def rank_summary(self):
        return {"A": rank(self.A), "B": rank(self.B), "M": rank(self.M)}


@dataclass(frozen=True)
class Quadrature:
    """
    A decoupled variable: d(variable)/dt = variable * (lam + sum coeff * prod y^row)
    where y are the retained variables named in `over`.
    """

    variable: str
    lam: Fraction
    terms: tuple
    over: tuple = field(default=())


@dataclass(frozen=True)
class FirstIntegral:
    """Conserved quantity prod x_i^exponents_i, equal to `constant` when known."""

    exponents: tuple
    constant: Fraction = None
    label: str = ""
    over: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "exponents", rational_vector(self.exponents))
        if all(e == 0 for e in self.exponents):
            raise ValueError("a first integral needs a nonzero exponent vector")

    def describe(self, names=None):
        names = names or self.over or default_names(len(self.exponents))
        parts = []
        for name, e in zip(names, self.exponents):
            if e == 0:
                continue
            parts.append(name if e == 1 else f"{name}^({e})")
        text = " * ".join(parts)
        return f"{text} = {self.constant}" if self.constant is not None else text


# ===================================================================
# OPERATIONS
# ===================================================================
def validate(sys):
    """Raise DimensionMismatch naming the offending field, else return True."""
    n = len(sys.lam)
    if n == 0:
        raise DimensionMismatch("lambda", "a QP system needs at least one variable")
    if sys.A.rows != n:
        raise DimensionMismatch("A", f"A has {sys.A.rows} rows, expected n={n}")
    m = sys.A.cols
    if sys.B.rows != m:
        raise DimensionMismatch("B", f"B has {sys.B.rows} rows, expected m={m}")
    if sys.B.cols != n:
        raise DimensionMismatch("B", f"B has {sys.B.cols} columns, expected n={n}")
    if len(sys.var_names) != n:
        raise DimensionMismatch("variables", f"{len(sys.var_names)} labels for n={n}")
    if len(set(sys.var_names)) != n:
        raise DimensionMismatch("variables", "variable labels must be unique")
    return True


def as_float_array(matrix):
    values = [[float(x) for x in row] for row in matrix.tolist()]
    return np.array(values, dtype=float).reshape(matrix.rows, matrix.cols)


def evaluate_field(sys, x):
    """Floating-point right-hand side of the QP system at a positive point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise DimensionMismatch("x", f"state has shape {x.shape}, expected ({sys.n},)")
    if np.any(x <= 0):
        raise NonPositiveState(f"state {x.tolist()} is not strictly positive")
    lam = np.array([float(v) for v in sys.lam])
    monomials = np.exp(as_float_array(sys.B) @ np.log(x))
    return x * (lam + as_float_array(sys.A) @ monomials)


def canonicalize(sys):
    """
    Normal form: zero-exponent quasimonomials fold into lambda, duplicated
    exponent rows merge by summing their A columns, and quasimonomials whose
    A column vanishes are removed. Surviving order follows first occurrence.
    """
    n = sys.n
    lam = list(sys.lam)
    groups = {}
    order = []
    for j in range(sys.m):
        exponents = sys.B.row(j)
        column = sys.A.col(j)
        if all(e == 0 for e in exponents):
            lam = [a + b for a, b in zip(lam, column)]
            continue
        if exponents in groups:
            groups[exponents] = [a + b for a, b in zip(groups[exponents], column)]
        else:
            groups[exponents] = list(column)
            order.append(exponents)
    kept = [e for e in order if any(c != 0 for c in groups[e])]
    A = RMatrix.from_columns([groups[e] for e in kept], rows=n)
    B = RMatrix(kept, cols=n)
    if len(kept) != sys.m:
        logger.debug(f"canonicalize: {sys.m} -> {len(kept)} quasimonomials")
    return QPSystem(tuple(lam), A, B, sys.var_names)


def is_canonical(sys):
    return canonicalize(sys) == sys


def class_invariant(sys):
    """B . (lambda | A): unchanged by every quasimonomial transformation."""
    return sys.B @ sys.M


def is_standard(sys):
    n = sys.n
    ranks = sys.rank_summary()
    return sys.m >= n and ranks["A"] == ranks["B"] == ranks["M"] == n


def nonlinear_term_count(sys):
    return sum(1 for i in range(sys.n) for j in range(sys.m) if sys.A[i, j] != 0)

