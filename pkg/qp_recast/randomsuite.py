# qp_recast/randomsuite.py

"""
Seeded random systems and the property checks run by `selfcheck` and the
test suite. Every generator takes a `random.Random` so runs are reproducible.
"""

import logging
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegenerateSystem, RecastError
from .exactalg import RMatrix, determinant
from .qpmodel import QPSystem, class_invariant, is_standard
from .reductions import EmbedMode, standardize, to_lotka_volterra
from .transforms import quasimonomial_transform

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 500


@dataclass(frozen=True)
class CheckResult:
    name: str
    runs: int
    failures: tuple = ()

    @property
    def passed(self):
        return not self.failures

    def __str__(self):
        status = "ok" if self.passed else f"{len(self.failures)} failed"
        return f"{self.name}: {self.runs} runs, {status}"


# ===================================================================
# GENERATORS
# ===================================================================
def _exponent_rows(rng, n, m, bound):
    choices = range(-bound, bound + 1)
    m = min(m, (2 * bound + 1) ** n - 1)
    rows = []
    while len(rows) < m:
        row = tuple(rng.choice(choices) for _ in range(n))
        if any(row) and row not in rows:
            rows.append(row)
    return rows


def _coefficient(rng, bound, scale):
    return Fraction(rng.randint(-bound, bound)) * scale


def random_system(
    rng, n=None, m=None, n_max=4, m_max=6, bound=3, exponent_bound=1, scale=Fraction(1)
):
    """Canonical system with m >= 1 distinct nonzero exponent rows and nonzero A columns."""
    n = n or rng.randint(1, n_max)
    m = m or rng.randint(1, m_max)
    rows = _exponent_rows(rng, n, m, exponent_bound)
    columns = []
    for _ in rows:
        column = [Fraction(0)] * n
        while not any(column):
            column = [_coefficient(rng, bound, scale) for _ in range(n)]
        columns.append(column)
    lam = [_coefficient(rng, bound, scale) for _ in range(n)]
    return QPSystem(lam, RMatrix.from_columns(columns, rows=n), RMatrix(rows, cols=n))


def random_standard_system(rng, n_max=4, m_max=6, **kwargs):
    for _ in range(MAX_ATTEMPTS):
        n = rng.randint(1, n_max)
        sys = random_system(rng, n=n, m=rng.randint(n, m_max), **kwargs)
        if is_standard(sys):
            return sys
    raise RuntimeError("no standard system drawn")


def random_invertible(rng, n, bound=3):
    for _ in range(MAX_ATTEMPTS):
        C = RMatrix([[rng.randint(-bound, bound) for _ in range(n)] for _ in range(n)])
        if determinant(C) != 0:
            return C
    raise RuntimeError(f"no invertible {n}x{n} matrix drawn")


def _with_row(matrix, i, values):
    grid = matrix.tolist()
    grid[i] = list(values)
    return RMatrix(grid, cols=matrix.cols)


def random_deficient_system(rng, deficient, n_max=4, m_max=6, **kwargs):
    """
    A system whose rank of `deficient` ("A", "B" or "M") is below n:
    B loses rank through a repeated column, M and A through a repeated row.
    """
    for _ in range(MAX_ATTEMPTS):
        n = rng.randint(2, n_max)
        sys = random_system(rng, n=n, m=rng.randint(n, m_max), **kwargs)
        if deficient == "B":
            grid = [list(row) for row in sys.B.tolist()]
            for row in grid:
                row[-1] = row[0]
            if len({tuple(r) for r in grid}) != len(grid) or not all(any(r) for r in grid):
                continue
            sys = QPSystem(sys.lam, sys.A, RMatrix(grid, cols=n))
        elif deficient == "M":
            A = _with_row(sys.A, n - 1, sys.A.row(0))
            if not all(any(A.col(j)) for j in range(A.cols)):
                continue
            lam = sys.lam[: n - 1] + (sys.lam[0],)
            sys = QPSystem(lam, A, sys.B)
        else:
            A = _with_row(sys.A, n - 1, sys.A.row(0))
            if not all(any(A.col(j)) for j in range(A.cols)):
                continue
            sys = QPSystem(sys.lam, A, sys.B)
        ranks = sys.rank_summary()
        if ranks[deficient] < n and (deficient != "A" or ranks["M"] == n == ranks["B"]):
            return sys
    raise RuntimeError(f"no system with deficient rank({deficient}) drawn")


def random_suite(rng, count, **kwargs):
    """Mixed systems: one in four generic, the rest rank-deficient in A, B or M."""
    systems = []
    kinds = [None, "A", "B", "M"]
    for i in range(count):
        kind = kinds[i % len(kinds)]
        if kind is None:
            systems.append(random_system(rng, **kwargs))
        else:
            systems.append(random_deficient_system(rng, kind, **kwargs))
    return systems


# ===================================================================
# PROPERTY CHECKS
# ===================================================================
def check_class_invariant(seed=0, count=100):
    rng = random.Random(seed)
    failures = []
    for i in range(count):
        sys = random_standard_system(rng, exponent_bound=3)
        C = random_invertible(rng, sys.n)
        if class_invariant(quasimonomial_transform(sys, C)) != class_invariant(sys):
            failures.append(f"run {i}: quasimonomial transform changed B.M")
        if sys.m > sys.n:
            lv = to_lotka_volterra(sys, EmbedMode.parse("full")).output
            if not lv.B.is_identity() or lv.M != class_invariant(sys):
                failures.append(f"run {i}: full Lotka-Volterra form is not (I, B.M)")
    return CheckResult("class invariant", count, tuple(failures))


def check_standardization(seed=0, count=50):
    rng = random.Random(seed)
    failures = []
    degenerate = 0
    for i, sys in enumerate(random_suite(rng, count)):
        try:
            report = standardize(sys)
        except DegenerateSystem:
            degenerate += 1
            continue
        except RecastError as exc:
            failures.append(f"run {i}: {type(exc).__name__}: {exc}")
            continue
        out = report.output
        if not is_standard(out):
            failures.append(f"run {i}: output ranks {out.rank_summary()} with n={out.n}")
        elif not report.replays():
            failures.append(f"run {i}: trace does not replay")
    if degenerate:
        logger.info(f"standardization: {degenerate} systems reduced to linear ones")
    return CheckResult("standardization", count, tuple(failures))


def check_integral_drift(seed=0, count=50, t_end=1.0, tol=1e-9, limit=1e-6):
    """rank(M) integrals emitted by standardize stay constant along the input flow."""
    from .numeric import check_conservation, integrate

    rng = random.Random(seed)
    failures = []
    checked = 0
    for i, sys in enumerate(random_suite(rng, count, scale=Fraction(1, 100))):
        try:
            report = standardize(sys)
        except DegenerateSystem:
            continue
        if not report.first_integrals:
            continue
        traj = integrate(sys, np.ones(sys.n), t_end, tol)
        for fi in report.first_integrals:
            checked += 1
            drift = check_conservation(traj, fi)
            if drift > limit:
                failures.append(f"run {i}: drift {drift:.2e} for {fi.describe()}")
    logger.info(f"integral drift: {checked} integrals checked")
    return CheckResult("first-integral drift", checked, tuple(failures))


def run_all(seed=0, count=50, numeric=False):
    results = [check_class_invariant(seed, 2 * count), check_standardization(seed, count)]
    if numeric:
        results.append(check_integral_drift(seed, count))
    for result in results:
        logger.info(str(result))
    return results
