# qp_recast/exactalg.py

"""
Exact rational dense linear algebra.

Every structural decision of the recasting pipeline (ranks, kernels, inverses,
row dependencies) is made here with `fractions.Fraction` entries, so branching
never depends on floating-point round-off.
"""

import logging
import re
from fractions import Fraction
from math import lcm

from .errors import DimensionMismatch, NotSpanning, SingularMatrix

logger = logging.getLogger(__name__)

Rational = Fraction

_RATIONAL_RE = re.compile(r"^\s*(-?\d+)(?:\s*/\s*(\d+))?\s*$")


def to_rational(value):
    """
    Coerce an int, Fraction or "p", "-p", "p/q" string into a Fraction.
    Floats and booleans are refused: the structural layer stays exact.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        match = _RATIONAL_RE.match(value)
        if not match:
            raise ValueError(f"'{value}' is not a rational of the form p or p/q")
        numerator = int(match.group(1))
        denominator = int(match.group(2)) if match.group(2) is not None else 1
        if denominator == 0:
            raise ValueError(f"'{value}' has a zero denominator")
        return Fraction(numerator, denominator)
    raise TypeError(f"cannot use {type(value).__name__} {value!r} as an exact rational")


def rational_vector(values):
    return tuple(to_rational(v) for v in values)


class RMatrix:
    """
    Immutable row-major matrix of Fractions.

    Empty shapes are legal: a 0-row matrix remembers its column count so that
    p = 0 embeddings and m = 0 systems compose like any other matrix.
    """

    __slots__ = ("rows", "cols", "_grid")

    def __init__(self, entries=(), cols=None):
        grid = tuple(tuple(to_rational(x) for x in row) for row in entries)
        if grid:
            width = len(grid[0])
            if any(len(row) != width for row in grid):
                raise DimensionMismatch("entries", "ragged matrix rows")
            if cols is not None and cols != width:
                raise DimensionMismatch("entries", f"expected {cols} columns, got {width}")
            cols = width
        self.rows = len(grid)
        self.cols = cols or 0
        self._grid = grid

    # --- constructors ---
    @classmethod
    def zeros(cls, rows, cols):
        return cls([[0] * cols for _ in range(rows)], cols=cols)

    @classmethod
    def identity(cls, n):
        return cls([[int(i == j) for j in range(n)] for i in range(n)], cols=n)

    @classmethod
    def column(cls, values):
        return cls([[v] for v in values], cols=1)

    @classmethod
    def row_vector(cls, values):
        values = list(values)
        return cls([values], cols=len(values))

    @classmethod
    def from_columns(cls, columns, rows):
        columns = [tuple(c) for c in columns]
        return cls(
            [[col[i] for col in columns] for i in range(rows)], cols=len(columns)
        )

    @classmethod
    def diagonal(cls, values):
        values = list(values)
        n = len(values)
        return cls(
            [[values[i] if i == j else 0 for j in range(n)] for i in range(n)], cols=n
        )

    # --- access ---
    @property
    def shape(self):
        return (self.rows, self.cols)

    def __getitem__(self, index):
        i, j = index
        return self._grid[i][j]

    def row(self, i):
        return self._grid[i]

    def col(self, j):
        return tuple(row[j] for row in self._grid)

    def tolist(self):
        return [list(row) for row in self._grid]

    def is_square(self):
        return self.rows == self.cols

    def is_zero(self):
        return all(x == 0 for row in self._grid for x in row)

    def is_identity(self):
        return self.is_square() and self == RMatrix.identity(self.rows)

    def __eq__(self, other):
        if not isinstance(other, RMatrix):
            return NotImplemented
        return self.shape == other.shape and self._grid == other._grid

    def __hash__(self):
        return hash((self.shape, self._grid))

    def __repr__(self):
        body = "; ".join(", ".join(str(x) for x in row) for row in self._grid)
        return f"RMatrix({self.rows}x{self.cols}: [{body}])"

    # --- arithmetic ---
    def __matmul__(self, other):
        if self.cols != other.rows:
            raise DimensionMismatch(
                "matmul", f"cannot multiply {self.shape} by {other.shape}"
            )
        other_cols = [other.col(j) for j in range(other.cols)]
        return RMatrix(
            [
                [sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in other_cols]
                for row in self._grid
            ],
            cols=other.cols,
        )

    def __add__(self, other):
        self._check_same_shape(other)
        return RMatrix(
            [[a + b for a, b in zip(r, s)] for r, s in zip(self._grid, other._grid)],
            cols=self.cols,
        )

    def __sub__(self, other):
        self._check_same_shape(other)
        return RMatrix(
            [[a - b for a, b in zip(r, s)] for r, s in zip(self._grid, other._grid)],
            cols=self.cols,
        )

    def __neg__(self):
        return self.scale(-1)

    def scale(self, factor):
        factor = to_rational(factor)
        return RMatrix([[factor * x for x in row] for row in self._grid], cols=self.cols)

    def apply(self, vector):
        """Matrix-vector product on a plain sequence, returned as a tuple."""
        vector = rational_vector(vector)
        if len(vector) != self.cols:
            raise DimensionMismatch("vector", f"expected length {self.cols}")
        return tuple(
            sum((a * b for a, b in zip(row, vector)), Fraction(0)) for row in self._grid
        )

    def _check_same_shape(self, other):
        if self.shape != other.shape:
            raise DimensionMismatch("shape", f"{self.shape} != {other.shape}")

    # --- structure ---
    def transpose(self):
        return RMatrix([self.col(j) for j in range(self.cols)], cols=self.rows)

    def hstack(self, other):
        if self.rows != other.rows:
            raise DimensionMismatch("hstack", f"{self.rows} rows vs {other.rows}")
        return RMatrix(
            [r + s for r, s in zip(self._grid, other._grid)], cols=self.cols + other.cols
        )

    def vstack(self, other):
        if self.cols != other.cols:
            raise DimensionMismatch("vstack", f"{self.cols} cols vs {other.cols}")
        return RMatrix(self._grid + other._grid, cols=self.cols)

    def take_rows(self, indices):
        return RMatrix([self._grid[i] for i in indices], cols=self.cols)

    def take_cols(self, indices):
        indices = list(indices)
        return RMatrix([[row[j] for j in indices] for row in self._grid], cols=len(indices))


# ===================================================================
# ELIMINATION KERNELS
# ===================================================================
def _integer_rows(matrix):
    """Scale every row by the lcm of its denominators; returns (rows, scales)."""
    rows, scales = [], []
    for row in matrix.tolist():
        scale = lcm(*(x.denominator for x in row)) if row else 1
        rows.append([int(x * scale) for x in row])
        scales.append(scale)
    return rows, scales


def _bareiss(grid, cols):
    """
    Fraction-free (Bareiss) forward elimination on integer rows.

    Every division is exact by Sylvester's identity, so coefficients stay
    integers bounded by minors of the input. Returns the echelon grid, the
    pivot columns and the row-swap parity.
    """
    a = [list(row) for row in grid]
    n_rows = len(a)
    previous = 1
    r = 0
    pivots = []
    swaps = 0
    for c in range(cols):
        if r == n_rows:
            break
        p = next((i for i in range(r, n_rows) if a[i][c] != 0), None)
        if p is None:
            continue
        if p != r:
            a[r], a[p] = a[p], a[r]
            swaps += 1
        pivot = a[r][c]
        for i in range(r + 1, n_rows):
            factor = a[i][c]
            for j in range(c + 1, cols):
                a[i][j] = (pivot * a[i][j] - factor * a[r][j]) // previous
            a[i][c] = 0
        previous = pivot
        pivots.append(c)
        r += 1
    return a, pivots, swaps


def rref(matrix):
    """Reduced row echelon form over the rationals; returns (grid, pivot_columns)."""
    a = matrix.tolist()
    n_rows, n_cols = matrix.rows, matrix.cols
    pivots = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        p = next((i for i in range(r, n_rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        pivot = a[r][c]
        a[r] = [x / pivot for x in a[r]]
        for i in range(n_rows):
            if i != r and a[i][c] != 0:
                factor = a[i][c]
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    return a, pivots


# ===================================================================
# PUBLIC OPERATIONS
# ===================================================================
def rank(matrix):
    if matrix.rows == 0 or matrix.cols == 0:
        return 0
    grid, _ = _integer_rows(matrix)
    _, pivots, _ = _bareiss(grid, matrix.cols)
    return len(pivots)


def determinant(matrix):
    if not matrix.is_square():
        raise DimensionMismatch("matrix", "determinant of a non-square matrix")
    n = matrix.rows
    if n == 0:
        return Fraction(1)
    grid, scales = _integer_rows(matrix)
    echelon, pivots, swaps = _bareiss(grid, n)
    if len(pivots) < n:
        return Fraction(0)
    value = Fraction(echelon[n - 1][n - 1] * (-1) ** swaps)
    for scale in scales:
        value /= scale
    return value


def inverse(matrix):
    if not matrix.is_square():
        raise DimensionMismatch("matrix", f"cannot invert a {matrix.shape} matrix")
    n = matrix.rows
    reduced, pivots = rref(matrix.hstack(RMatrix.identity(n)))
    if pivots[:n] != list(range(n)):
        raise SingularMatrix(f"matrix of size {n} has rank {rank(matrix)}")
    return RMatrix([row[n:] for row in reduced], cols=n)


def kernel_basis(matrix):
    """
    Canonical null-space basis read off the reduced row echelon form: one
    vector per free column, with that free entry set to 1.
    """
    reduced, pivots = rref(matrix)
    free = [j for j in range(matrix.cols) if j not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * matrix.cols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -reduced[i][f]
        basis.append(tuple(v))
    logger.debug(f"kernel of {matrix.shape} matrix has dimension {len(basis)}")
    return basis


def select_independent_rows(matrix, order=None):
    """
    Greedy scan for a maximal set of linearly independent rows.

    Rows are visited in `order` (default top to bottom) and kept when they are
    independent of those already kept, so the default result is the
    lexicographically smallest basis. Indices come back in visiting order.
    """
    order = range(matrix.rows) if order is None else list(order)
    basis = []
    chosen = []
    for i in order:
        v = list(matrix.row(i))
        for pc, b in basis:
            if v[pc] != 0:
                factor = v[pc] / b[pc]
                v = [x - factor * y for x, y in zip(v, b)]
        lead = next((j for j, x in enumerate(v) if x != 0), None)
        if lead is not None:
            basis.append((lead, v))
            chosen.append(i)
    return chosen


def row_dependencies(matrix, pivot_rows):
    """
    Express every non-pivot row as a combination of the pivot rows.

    Returns (gamma, others): `others` lists the non-pivot row indices in
    ascending order and row t of `gamma` holds the coefficients with
    row_{others[t]} = sum_i gamma[t, i] * row_{pivot_rows[i]}.
    """
    pivot_rows = list(pivot_rows)
    pivot_block = matrix.take_rows(pivot_rows)
    r = len(pivot_rows)
    if rank(pivot_block) != r:
        raise NotSpanning("pivot rows are linearly dependent")
    chosen = set(pivot_rows)
    others = [k for k in range(matrix.rows) if k not in chosen]
    system = pivot_block.transpose()
    gamma = []
    for k in others:
        reduced, pivots = rref(system.hstack(RMatrix.column(matrix.row(k))))
        if r in pivots:
            raise NotSpanning(f"row {k} is outside the span of rows {pivot_rows}")
        gamma.append([reduced[i][r] for i in range(r)])
    return RMatrix(gamma, cols=r), others
